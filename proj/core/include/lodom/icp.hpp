#pragma once

#include "lodom/correspond.hpp"

namespace lodom {

struct IcpConfig {
  int max_iterations = 20;
  double translation_tol = 1e-4;  // meters, per-iteration update norm
  double rotation_tol = 1e-4;     // radians, per-iteration update angle
  double epsilon = 0.1;           // constant addend of the normalized weights
  double max_dist = 2.0;          // association gate, meters
  double max_condition = 1e8;     // normal-equation conditioning guard
};

struct IcpResult {
  Pose delta;                  // maps the transformed source onto the target
  int iterations_used = 0;
  double final_objective = 0.0;  // weighted mean squared point-to-plane error
  bool converged = false;
  std::size_t last_pair_count = 0;
  std::size_t last_usable_pairs = 0;
  // objective at the start of each iteration plus the final state; lets
  // callers audit monotonicity (re-association can occasionally raise it)
  std::vector<double> objective_history;
  int objective_increases = 0;
};

/// Signed plane distance n . (x' - x) of a transformed source point against a
/// target point's tangent plane. The optimization term squares it.
double point_to_plane_residual(const Vec3& target_pos, const Vec3& transformed_src_pos,
                               const Vec3& target_normal);

/// Confidence-weighted point-to-plane alignment of transformed_src onto
/// target. Each iteration: associate -> fill confidences -> max-normalized
/// weights -> weighted least squares over the small-angle parameters
/// (rx, ry, rz, tx, ty, tz) -> fold the step into delta. Stops when both
/// per-iteration update norms fall below tolerance or at max_iterations.
///
/// Throws NumericalError on an empty association and DegenerateGeometryError
/// when fewer than 6 usable pairs remain or the 6x6 system's condition number
/// exceeds cfg.max_condition (open-highway geometry must fail loudly).
IcpResult icp_refine(const PointCloud& target, const PointCloud& transformed_src,
                     const ConfidenceProvider& confidences, const IcpConfig& cfg = {});

/// Folds the ICP residual into the prediction: compose(delta, pred), i.e.
/// t* = dR t_pred + dt and R* = dR R_pred.
Pose rectify(const Pose& pred, const Pose& delta);

}  // namespace lodom
