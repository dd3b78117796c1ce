#include "lodom/icp.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <sstream>

#include "lodom/errors.hpp"

namespace lodom {

double point_to_plane_residual(const Vec3& target_pos, const Vec3& transformed_src_pos,
                               const Vec3& target_normal) {
  return target_normal.dot(transformed_src_pos - target_pos);
}

namespace {

struct WeightedSystem {
  Eigen::Matrix<double, 6, 6> lhs = Eigen::Matrix<double, 6, 6>::Zero();
  Eigen::Matrix<double, 6, 1> rhs = Eigen::Matrix<double, 6, 1>::Zero();
  double objective = 0.0;  // sum of w * residual^2, pre-normalization
  std::size_t usable = 0;
};

WeightedSystem build_system(const PointCloud& target, const PointCloud& working,
                            const CorrespondenceSet& cs, const std::vector<double>& weights) {
  WeightedSystem sys;
  for (std::size_t idx = 0; idx < cs.pairs.size(); ++idx) {
    const auto& pair = cs.pairs[idx];
    const Vec3& n = target.points[pair.tgt_index].normal;
    if (n.squaredNorm() == 0.0) continue;  // degenerate-normal pairs dropped

    const Vec3& x = target.points[pair.tgt_index].position;
    const Vec3& xp = working.points[pair.src_index].position;
    const double r = point_to_plane_residual(x, xp, n);
    const double w = weights[idx];

    Eigen::Matrix<double, 6, 1> j;
    j.head<3>() = xp.cross(n);
    j.tail<3>() = n;

    sys.lhs.noalias() += w * j * j.transpose();
    sys.rhs.noalias() += w * j * r;
    sys.objective += w * r * r;
    sys.usable += 1;
  }
  return sys;
}

Pose small_angle_step(const Eigen::Matrix<double, 6, 1>& xi) {
  const Vec3 rotvec = xi.head<3>();
  const double angle = rotvec.norm();
  Quat q = Quat::Identity();
  if (angle > 0.0) q = Quat(Eigen::AngleAxisd(angle, rotvec / angle));
  return Pose(q, xi.tail<3>());
}

}  // namespace

IcpResult icp_refine(const PointCloud& target, const PointCloud& transformed_src,
                     const ConfidenceProvider& confidences, const IcpConfig& cfg) {
  if (target.empty() || transformed_src.empty())
    throw NumericalError("icp_refine: empty input cloud");

  IcpResult result;
  PointCloud working = transformed_src;

  auto evaluate = [&](bool solve) -> std::optional<Eigen::Matrix<double, 6, 1>> {
    CorrespondenceSet cs = associate(target, working, cfg.max_dist);
    if (cs.empty()) throw NumericalError("icp_refine: association produced no pairs");
    confidences(cs);
    const std::vector<double> weights = icp_weights(cs, cfg.epsilon);
    const WeightedSystem sys = build_system(target, working, cs, weights);

    result.last_pair_count = cs.size();
    result.last_usable_pairs = sys.usable;

    const double objective = sys.objective / static_cast<double>(cs.target_size);
    if (!result.objective_history.empty() &&
        objective > result.objective_history.back() * (1.0 + 1e-9) + 1e-15)
      result.objective_increases += 1;
    result.objective_history.push_back(objective);
    result.final_objective = objective;

    if (!solve) return std::nullopt;

    if (sys.usable < 6) {
      std::ostringstream msg;
      msg << "icp_refine: degenerate geometry, only " << sys.usable
          << " usable pairs (need >= 6) out of " << cs.size() << " correspondences";
      throw DegenerateGeometryError(msg.str());
    }

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 6, 6>> eig(sys.lhs);
    const double min_ev = eig.eigenvalues().minCoeff();
    const double max_ev = eig.eigenvalues().maxCoeff();
    if (min_ev <= 0.0 || max_ev / min_ev > cfg.max_condition) {
      std::ostringstream msg;
      msg << "icp_refine: degenerate geometry, normal-equation condition number "
          << (min_ev <= 0.0 ? std::numeric_limits<double>::infinity() : max_ev / min_ev)
          << " exceeds " << cfg.max_condition << " (" << sys.usable << " usable pairs)";
      throw DegenerateGeometryError(msg.str());
    }

    return sys.lhs.ldlt().solve(-sys.rhs);
  };

  for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
    const auto xi = evaluate(true);
    const Pose step = small_angle_step(*xi);
    result.delta = compose(step, result.delta);
    working = transform_cloud(working, step);
    result.iterations_used = iter;

    if (xi->tail<3>().norm() < cfg.translation_tol &&
        xi->head<3>().norm() < cfg.rotation_tol) {
      result.converged = true;
      break;
    }
  }

  // a converged run moved less than the tolerances on its last step, so the
  // last recorded objective already describes the final state
  if (!result.converged) evaluate(false);
  return result;
}

Pose rectify(const Pose& pred, const Pose& delta) { return compose(delta, pred); }

}  // namespace lodom
