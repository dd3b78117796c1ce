#include "lodom/losses.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "lodom/errors.hpp"

namespace lodom {

namespace {

// Shared chain-rule state for losses differentiated through
// x'_j = R(q/|q|) x_{t-1} + t.
struct PoseChain {
  Mat3 rot;
  std::array<Mat3, 4> drot;       // dR/du_k at the normalized quaternion
  Eigen::Matrix4d norm_jacobian;  // d(q/|q|)/dq

  explicit PoseChain(const Pose& pose)
      : rot(pose.rotation.normalized().toRotationMatrix()),
        drot(rotation_matrix_derivatives(pose.rotation.normalized())),
        norm_jacobian(normalization_jacobian(pose.rotation)) {}

  Vec3 map(const Vec3& p, const Pose& pose) const { return rot * p + pose.translation; }

  // Accumulates dL/db into the 7-parameter gradient, b = R p + t.
  void accumulate(const Vec3& p, const Vec3& dL_db, Eigen::Vector4d& gq, Vec3& gt) const {
    for (int k = 0; k < 4; ++k) gq[k] += dL_db.dot(drot[k] * p);
    gt += dL_db;
  }

  PoseGrad finish(const Eigen::Vector4d& gq, const Vec3& gt) const {
    PoseGrad g;
    g.head<4>() = norm_jacobian.transpose() * gq;
    g.tail<3>() = gt;
    return g;
  }
};

}  // namespace

UncertaintyValue uncertainty(const UncertaintyParam& s, double l) {
  const double e = std::exp(-s.s);
  return {e * l + s.s, -e * l + 1.0};
}

LossValue spherical_loss(const PointCloud& target, const PointCloud& source,
                         const CorrespondenceSet& cs, const Pose& pose, bool use_confidence) {
  if (cs.empty()) throw NumericalError("spherical_loss: empty correspondence set");
  const PoseChain chain(pose);
  const double inv_n = 1.0 / static_cast<double>(cs.target_size);

  double value = 0.0;
  Eigen::Vector4d gq = Eigen::Vector4d::Zero();
  Vec3 gt = Vec3::Zero();

  for (const auto& pair : cs.pairs) {
    const Vec3& a = target.points[pair.tgt_index].position;
    const Vec3& p = source.points[pair.src_index].position;
    const Vec3 b = chain.map(p, pose);
    const double na = a.norm();
    const double nb = b.norm();
    const double m = use_confidence ? pair.confidence : 1.0;

    const double cosv = a.dot(b) / (na * nb);
    value += -inv_n * m * cosv;

    const Vec3 dcos_db = a / (na * nb) - (a.dot(b) / (na * nb * nb * nb)) * b;
    chain.accumulate(p, (-inv_n * m) * dcos_db, gq, gt);
  }
  return {value, chain.finish(gq, gt)};
}

LossValue range_alignment_loss(const PointCloud& target, const PointCloud& source,
                               const CorrespondenceSet& cs, const Pose& pose, double gamma) {
  if (cs.empty()) throw NumericalError("range_alignment_loss: empty correspondence set");
  const PoseChain chain(pose);
  const double inv_n = 1.0 / static_cast<double>(cs.target_size);

  double value = 0.0;
  Eigen::Vector4d gq = Eigen::Vector4d::Zero();
  Vec3 gt = Vec3::Zero();

  for (const auto& pair : cs.pairs) {
    const Vec3& a = target.points[pair.tgt_index].position;
    const Vec3& p = source.points[pair.src_index].position;
    const Vec3 b = chain.map(p, pose);
    const double d = a.norm() - b.norm();
    const double m = pair.confidence;

    value += inv_n * (m * d * d - gamma * std::log(m));
    chain.accumulate(p, inv_n * m * 2.0 * d * (-b / b.norm()), gq, gt);
  }
  return {value, chain.finish(gq, gt)};
}

LossValue euclidean_loss(const PointCloud& target, const PointCloud& source,
                         const CorrespondenceSet& cs, const Pose& pose) {
  if (cs.empty()) throw NumericalError("euclidean_loss: empty correspondence set");
  const PoseChain chain(pose);
  const double inv_n = 1.0 / static_cast<double>(cs.size());

  double value = 0.0;
  Eigen::Vector4d gq = Eigen::Vector4d::Zero();
  Vec3 gt = Vec3::Zero();

  for (const auto& pair : cs.pairs) {
    const Vec3& a = target.points[pair.tgt_index].position;
    const Vec3& p = source.points[pair.src_index].position;
    const Vec3 b = chain.map(p, pose);
    value += inv_n * (a - b).squaredNorm();
    chain.accumulate(p, inv_n * 2.0 * (b - a), gq, gt);
  }
  return {value, chain.finish(gq, gt)};
}

ResidualLoss transformation_residual_loss(const Pose& pred, const Pose& rectified,
                                          const UncertaintyParam& s_alpha,
                                          const UncertaintyParam& s_beta) {
  const double lt = (rectified.translation - pred.translation).squaredNorm();
  const Mat3 r_pred = pred.rotation.normalized().toRotationMatrix();
  const Mat3 r_diff = r_pred - rectified.rotation_matrix();
  const double lr = r_diff.squaredNorm();

  const UncertaintyValue ua = uncertainty(s_alpha, lt);
  const UncertaintyValue ub = uncertainty(s_beta, lr);

  ResidualLoss out;
  out.value = ua.value + ub.value;
  out.d_s_alpha = ua.d_ds;
  out.d_s_beta = ub.d_ds;

  const double ea = std::exp(-s_alpha.s);
  const double eb = std::exp(-s_beta.s);

  Eigen::Vector4d gq = Eigen::Vector4d::Zero();
  const auto drot = rotation_matrix_derivatives(pred.rotation.normalized());
  for (int k = 0; k < 4; ++k) gq[k] = eb * 2.0 * r_diff.cwiseProduct(drot[k]).sum();

  out.grad.head<4>() = normalization_jacobian(pred.rotation).transpose() * gq;
  out.grad.tail<3>() = ea * 2.0 * (pred.translation - rectified.translation);
  return out;
}

std::vector<Vec3> flow_target(const std::vector<Vec3>& points, const Pose& rectified) {
  const Mat3 rt = rectified.rotation_matrix().transpose();
  const Vec3 rt_t = rt * rectified.translation;
  std::vector<Vec3> flows;
  flows.reserve(points.size());
  for (const Vec3& x : points) flows.push_back(x - rt * x + rt_t);
  return flows;
}

std::vector<Vec3> flow_target(const PointCloud& points, const Pose& rectified) {
  return flow_target(points.positions(), rectified);
}

double flow_supervision_loss(const std::vector<std::vector<Vec3>>& predicted,
                             const std::vector<std::vector<Vec3>>& targets,
                             const LossWeights& weights, const UncertaintyParam& s_alpha) {
  if (predicted.size() != targets.size() ||
      predicted.size() != weights.flow_layer_weights.size())
    throw std::invalid_argument("flow_supervision_loss: layer count mismatch");

  double total = 0.0;
  for (std::size_t h = 0; h < predicted.size(); ++h) {
    if (predicted[h].size() != targets[h].size())
      throw std::invalid_argument("flow_supervision_loss: point count mismatch in layer " +
                                  std::to_string(h));
    if (predicted[h].empty()) continue;
    double layer = 0.0;
    for (std::size_t i = 0; i < predicted[h].size(); ++i)
      layer += uncertainty(s_alpha, (predicted[h][i] - targets[h][i]).squaredNorm()).value;
    total += weights.flow_layer_weights[h] * layer / static_cast<double>(predicted[h].size());
  }
  return total;
}

FlowLoss rigid_flow_loss(const PointCloud& target, const Pose& pose, const Pose& rectified,
                         double layer_weight, const UncertaintyParam& s_alpha) {
  if (target.empty()) throw NumericalError("rigid_flow_loss: empty target cloud");

  const Quat u = pose.rotation.normalized();
  const Mat3 rt = u.toRotationMatrix().transpose();
  const auto drot = rotation_matrix_derivatives(u);
  const Eigen::Matrix4d nj = normalization_jacobian(pose.rotation);
  const Mat3 star_rt = rectified.rotation_matrix().transpose();
  const Vec3 star_rt_t = star_rt * rectified.translation;

  const double e = std::exp(-s_alpha.s);
  const double inv_n = 1.0 / static_cast<double>(target.size());

  FlowLoss out;
  Eigen::Vector4d gq = Eigen::Vector4d::Zero();
  Vec3 gt = Vec3::Zero();

  for (const Point& pt : target.points) {
    const Vec3& x = pt.position;
    const Vec3 v = x - pose.translation;
    const Vec3 pred_flow = x - rt * v;                 // F under the current pose
    const Vec3 star_flow = x - star_rt * x + star_rt_t;  // stop-gradient target
    const Vec3 diff = pred_flow - star_flow;
    const double l = diff.squaredNorm();

    const UncertaintyValue uv = uncertainty(s_alpha, l);
    out.value += layer_weight * inv_n * uv.value;
    out.d_s_alpha += layer_weight * inv_n * uv.d_ds;

    // dF/dt = R^T, dF/du_k = -(dR/du_k)^T (x - t)
    const Vec3 dL_dF = layer_weight * inv_n * e * 2.0 * diff;
    gt += rt.transpose() * dL_dF;
    for (int k = 0; k < 4; ++k) gq[k] += dL_dF.dot(-(drot[k].transpose() * v));
  }

  out.grad.head<4>() = nj.transpose() * gq;
  out.grad.tail<3>() = gt;
  return out;
}

LossReport composite_loss(double l_sr, double l_ra, double l_tr, double l_fs,
                          std::size_t pair_count, const LossWeights& w) {
  LossReport r;
  r.l_sr = l_sr;
  r.l_ra = l_ra;
  r.l_tr = l_tr;
  r.l_fs = l_fs;
  r.pair_count = pair_count;
  r.total = w.w1 * l_sr + w.w2 * l_ra + w.w3 * l_tr + w.w4 * l_fs;
  return r;
}

std::string loss_report_csv_row(const std::string& frame_pair_id, const LossReport& r) {
  char buf[192];
  std::snprintf(buf, sizeof(buf), "%s,%.9e,%.9e,%.9e,%.9e,%.9e,%zu", frame_pair_id.c_str(),
                r.l_sr, r.l_ra, r.l_tr, r.l_fs, r.total, r.pair_count);
  return buf;
}

}  // namespace lodom
