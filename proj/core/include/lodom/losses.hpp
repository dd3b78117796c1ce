#pragma once

#include <string>
#include <vector>

#include "lodom/correspond.hpp"

namespace lodom {

/// Weights of the composite objective: data term (spherical or euclidean),
/// range alignment, transformation residual, flow supervision.
struct LossWeights {
  double w1 = 100.0;  // spherical reprojection / euclidean data term
  double w2 = 1.0;    // range alignment
  double w3 = 1.0;    // transformation residual
  double w4 = 1.0;    // flow supervision
  double gamma = 1e-3;
  std::vector<double> flow_layer_weights{1.0};
};

/// Homoscedastic-noise wrapper u_s(l) = e^{-s} * l + s with learnable s.
struct UncertaintyParam {
  double s = 0.0;
};

struct UncertaintyValue {
  double value = 0.0;
  double d_ds = 0.0;  // -e^{-s} l + 1, for the joint update of s
};

UncertaintyValue uncertainty(const UncertaintyParam& s, double l);

/// Gradient chart: (qw, qx, qy, qz, tx, ty, tz). Quaternion derivatives are
/// taken through q -> q/|q|, so finite differences on raw components agree.
using PoseGrad = Eigen::Matrix<double, 7, 1>;

struct LossValue {
  double value = 0.0;
  PoseGrad grad = PoseGrad::Zero();
};

/// Negative mean cosine between origin-to-point rays of matched pairs,
/// normalized by |P_t| (the full target size, not the surviving pair count).
/// With use_confidence the per-pair factor M^{ij} multiplies each cosine.
/// Gradients flow through x'_j = R x_{t-1} + t; association and confidences
/// are treated as constants. Throws NumericalError on an empty set.
LossValue spherical_loss(const PointCloud& target, const PointCloud& source,
                         const CorrespondenceSet& cs, const Pose& pose, bool use_confidence);

/// (1/|P_t|) * sum M (r(x_i) - r(x'_j))^2 - gamma log M, confidences fixed
/// (block-coordinate treatment); gradient through r(x'_j) = |R x_{t-1} + t|.
LossValue range_alignment_loss(const PointCloud& target, const PointCloud& source,
                               const CorrespondenceSet& cs, const Pose& pose, double gamma);

/// Mean squared Euclidean pair distance; the ablation substitute for the
/// spherical data term. No confidence factor.
LossValue euclidean_loss(const PointCloud& target, const PointCloud& source,
                         const CorrespondenceSet& cs, const Pose& pose);

struct ResidualLoss {
  double value = 0.0;
  PoseGrad grad = PoseGrad::Zero();  // wrt the predicted pose only
  double d_s_alpha = 0.0;
  double d_s_beta = 0.0;
};

/// u_alpha(|t* - t_pred|^2) + u_beta(|R* - R_pred|_F^2) with the rectified
/// pose treated as a constant target (stop-gradient).
ResidualLoss transformation_residual_loss(const Pose& pred, const Pose& rectified,
                                          const UncertaintyParam& s_alpha,
                                          const UncertaintyParam& s_beta);

/// Per-point rigid flow targets F*(x) = (I - R*)^T x + (R*)^T t*.
/// Consistency: x - F*(x) == apply(inverse(rectified), x).
std::vector<Vec3> flow_target(const PointCloud& points, const Pose& rectified);

std::vector<Vec3> flow_target(const std::vector<Vec3>& points, const Pose& rectified);

/// Scores externally supplied per-layer flow predictions against targets:
/// sum_h w_h * mean_i u_alpha(|F_pred - F*|^2). Throws std::invalid_argument
/// on layer or point count mismatch.
double flow_supervision_loss(const std::vector<std::vector<Vec3>>& predicted,
                             const std::vector<std::vector<Vec3>>& targets,
                             const LossWeights& weights, const UncertaintyParam& s_alpha);

struct FlowLoss {
  double value = 0.0;
  PoseGrad grad = PoseGrad::Zero();
  double d_s_alpha = 0.0;
};

/// Flow supervision with the rigid flow induced by `pose` as the prediction,
/// scored on the target cloud's points against the rectified-pose targets.
/// This is the solve-time form: a single geometric layer with weight
/// layer_weight, differentiable in the pose.
FlowLoss rigid_flow_loss(const PointCloud& target, const Pose& pose, const Pose& rectified,
                         double layer_weight, const UncertaintyParam& s_alpha);

struct LossReport {
  double l_sr = 0.0;
  double l_ra = 0.0;
  double l_tr = 0.0;
  double l_fs = 0.0;
  double total = 0.0;
  std::size_t pair_count = 0;
};

LossReport composite_loss(double l_sr, double l_ra, double l_tr, double l_fs,
                          std::size_t pair_count, const LossWeights& w);

inline constexpr const char* kLossReportCsvHeader =
    "frame_pair_id,l_sr,l_ra,l_tr,l_fs,total,pair_count";

std::string loss_report_csv_row(const std::string& frame_pair_id, const LossReport& r);

}  // namespace lodom
