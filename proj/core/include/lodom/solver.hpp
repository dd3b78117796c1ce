#pragma once

#include "lodom/icp.hpp"
#include "lodom/losses.hpp"

namespace lodom {

struct SolverConfig {
  enum class InitMode { kIdentity, kConstantVelocity };

  int max_outer_iterations = 30;
  double step_size = 0.25;        // base gradient step; halved on loss increase
  double convergence_tol = 1e-6;  // composite-loss change between outer iterations
  LossWeights weights;
  IcpConfig icp;
  double assoc_max_dist = 2.0;
  InitMode init_mode = InitMode::kConstantVelocity;

  bool use_confidence = true;  // off: uniform weights everywhere (ablation)
  bool use_spherical = true;   // off: euclidean data term (ablation)

  // |s_alpha|, |s_beta| clamp; keeps the uncertainty weights from drifting
  // once the residuals are at numerical zero
  double s_limit = 6.0;

  // estimate the (k-2, k) skip pair as a consistency diagnostic
  bool check_skip_pairs = false;
};

struct PairEstimate {
  Pose pose;               // R_pred, t_pred after optimization
  LossReport report;       // components at the returned iterate
  Pose rectified;          // R*, t* from the last successful ICP at that iterate
  ConfidenceSummary confidence_summary;
  int outer_iterations = 0;
  bool converged = false;
  bool association_empty = false;  // association empty at init, returned as-is
  bool icp_fallback = false;       // ICP degenerate: w3 = w4 = 0 for this pair
  double s_alpha = 0.0;
  double s_beta = 0.0;
};

/// Frame-pair ego-motion by minimizing the composite loss over the pose chart
/// (quaternion + translation) and the uncertainty parameters. Gradient
/// descent with per-iteration step halving; association, confidences and the
/// rectified target are rebuilt each outer iteration and frozen within it.
/// Returns the best-loss iterate.
PairEstimate estimate_pair(const PointCloud& prev, const PointCloud& curr, const Pose& init,
                           const SolverConfig& cfg);

struct SequenceResult {
  std::vector<Pose> trajectory;      // absolute poses, first = identity
  std::vector<PairEstimate> pairs;   // one per consecutive pair
  std::vector<bool> link_failed;     // pair could not be estimated; init pose used
  std::vector<double> skip_consistency;  // |t| mismatch of chained vs direct skip pairs
};

/// Chains estimate_pair over consecutive prepared sweeps. Absolute poses
/// follow the KITTI convention (pose k maps frame-k coordinates into frame 0),
/// so each link composes the inverse of the frame-to-frame estimate.
SequenceResult run_sequence(const std::vector<PointCloud>& sweeps, const SolverConfig& cfg);

}  // namespace lodom
