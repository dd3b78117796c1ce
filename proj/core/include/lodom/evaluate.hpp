#pragma once

#include <vector>

#include "lodom/se3.hpp"

namespace lodom {

struct Trajectory {
  std::vector<Pose> poses;  // absolute, time-ordered; first should be identity

  std::size_t size() const { return poses.size(); }
  bool empty() const { return poses.empty(); }
};

/// Prefix sums of consecutive translation distances; first entry 0.
std::vector<double> path_length(const Trajectory& traj);

struct LengthErrors {
  double length = 0.0;    // nominal segment length, meters
  double t_rel = 0.0;     // percent
  double r_rel = 0.0;     // degrees per 100 m
  std::size_t segments = 0;
};

struct DriftResult {
  double t_rel = 0.0;  // percent, mean over non-empty lengths
  double r_rel = 0.0;  // deg / 100 m
  std::vector<LengthErrors> per_length;
  std::size_t total_segments = 0;

  bool empty() const { return total_segments == 0; }
};

std::vector<double> default_segment_lengths();  // {100, 200, ..., 800}

/// Segment-based drift: for every start frame (configurable stride) and each
/// length d, the endpoint is the first frame whose ground-truth path length
/// is >= d beyond the start; the relative-pose error
/// E = (D_ij est)^-1 (D_ij gt) contributes |t(E)|/d and angle(E)/d. Errors
/// are averaged per length, then across lengths. Throws NumericalError on a
/// frame-count mismatch; a trajectory too short for every length yields a
/// flagged empty result.
DriftResult segment_errors(const Trajectory& est, const Trajectory& gt,
                           const std::vector<double>& lengths = default_segment_lengths(),
                           int start_stride = 1);

std::string drift_csv(const DriftResult& r);
std::string drift_summary(const DriftResult& r);

}  // namespace lodom
