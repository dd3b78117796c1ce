#pragma once

#include <functional>
#include <vector>

#include "lodom/cloud.hpp"

namespace lodom {

/// Lower clamp for per-pair confidences. The log barrier in the range
/// alignment objective forbids exactly-zero confidence; the floor keeps ICP
/// weights finite.
inline constexpr double kMinConfidence = 1e-3;

struct CorrespondencePair {
  int tgt_index = -1;      // into the target cloud P_t
  int src_index = -1;      // into the (transformed) source cloud P'_t
  double euclid_dist = 0;  // meters
  double range_diff = 0;   // r(x_i) - r(x'_j), signed, meters
  double cos_angle = 1;    // cosine of the angle between origin-to-point rays
  double confidence = 1;   // in [kMinConfidence, 1]
};

struct CorrespondenceSet {
  std::vector<CorrespondencePair> pairs;
  std::size_t target_size = 0;  // |P_t|, the loss normalizer

  bool empty() const { return pairs.empty(); }
  std::size_t size() const { return pairs.size(); }
};

/// For each target point, its exact NN in transformed_src; pairs beyond
/// max_dist are discarded. Confidences start at 1. An all-gated result comes
/// back as an empty set (callers must handle).
CorrespondenceSet associate(const PointCloud& target, const PointCloud& transformed_src,
                            double max_dist = 2.0);

/// Same, reusing a prebuilt index over transformed_src.
CorrespondenceSet associate(const PointCloud& target, const PointCloud& transformed_src,
                            const KdTree& src_index, double max_dist);

/// Per-pair closed-form minimizer of m*d^2 - gamma*log(m) over
/// m in [kMinConfidence, 1]: m* = clamp(gamma / d^2, ., .), with d the pair's
/// range difference (d = 0 gives m* = 1).
void solve_confidences(CorrespondenceSet& cs, double gamma);

double confidence_objective(double m, double d, double gamma);

/// Max-normalized ICP weights: M / max(M) + epsilon, in [epsilon, 1+epsilon].
/// Throws NumericalError on an empty set.
std::vector<double> icp_weights(const CorrespondenceSet& cs, double epsilon = 0.1);

/// Hook for the ICP inner loop: fills the confidences of a freshly associated
/// set. The default solves the range-alignment closed form; the uniform
/// provider implements the confidence-off ablation.
using ConfidenceProvider = std::function<void(CorrespondenceSet&)>;

ConfidenceProvider range_confidence_provider(double gamma);
ConfidenceProvider uniform_confidence_provider();

struct ConfidenceSummary {
  double min = 1.0;
  double mean = 1.0;
  double max = 1.0;
};

ConfidenceSummary summarize_confidences(const CorrespondenceSet& cs);

}  // namespace lodom
