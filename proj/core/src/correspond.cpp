#include "lodom/correspond.hpp"

#include <algorithm>
#include <cmath>

#include "lodom/errors.hpp"

namespace lodom {

CorrespondenceSet associate(const PointCloud& target, const PointCloud& transformed_src,
                            double max_dist) {
  if (target.empty() || transformed_src.empty())
    throw NumericalError("associate: both clouds must be nonempty");
  const KdTree index(transformed_src.positions());
  return associate(target, transformed_src, index, max_dist);
}

CorrespondenceSet associate(const PointCloud& target, const PointCloud& transformed_src,
                            const KdTree& src_index, double max_dist) {
  if (target.empty() || transformed_src.empty())
    throw NumericalError("associate: both clouds must be nonempty");
  if (max_dist <= 0.0) throw ConfigError("associate: max_dist must be > 0");

  CorrespondenceSet cs;
  cs.target_size = target.size();
  cs.pairs.reserve(target.size());
  const double max_sq = max_dist * max_dist;

  for (std::size_t i = 0; i < target.points.size(); ++i) {
    const Vec3& x = target.points[i].position;
    const KdTree::Neighbor nb = src_index.nearest(x);
    if (nb.sq_dist > max_sq) continue;
    const Vec3& xp = transformed_src.points[nb.index].position;

    CorrespondencePair pair;
    pair.tgt_index = static_cast<int>(i);
    pair.src_index = nb.index;
    pair.euclid_dist = std::sqrt(nb.sq_dist);
    const double r_tgt = x.norm();
    const double r_src = xp.norm();
    pair.range_diff = r_tgt - r_src;
    const double denom = r_tgt * r_src;
    pair.cos_angle = denom > 0.0 ? std::clamp(x.dot(xp) / denom, -1.0, 1.0) : 1.0;
    pair.confidence = 1.0;
    cs.pairs.push_back(pair);
  }
  return cs;
}

double confidence_objective(double m, double d, double gamma) {
  return m * d * d - gamma * std::log(m);
}

void solve_confidences(CorrespondenceSet& cs, double gamma) {
  if (gamma <= 0.0) throw ConfigError("solve_confidences: gamma must be > 0");
  for (CorrespondencePair& pair : cs.pairs) {
    const double d2 = pair.range_diff * pair.range_diff;
    pair.confidence = d2 == 0.0 ? 1.0 : std::clamp(gamma / d2, kMinConfidence, 1.0);
  }
}

std::vector<double> icp_weights(const CorrespondenceSet& cs, double epsilon) {
  if (cs.empty()) throw NumericalError("icp_weights: empty correspondence set");
  double max_conf = 0.0;
  for (const auto& p : cs.pairs) max_conf = std::max(max_conf, p.confidence);
  std::vector<double> weights;
  weights.reserve(cs.size());
  for (const auto& p : cs.pairs) weights.push_back(p.confidence / max_conf + epsilon);
  return weights;
}

ConfidenceProvider range_confidence_provider(double gamma) {
  return [gamma](CorrespondenceSet& cs) { solve_confidences(cs, gamma); };
}

ConfidenceProvider uniform_confidence_provider() {
  return [](CorrespondenceSet& cs) {
    for (auto& p : cs.pairs) p.confidence = 1.0;
  };
}

ConfidenceSummary summarize_confidences(const CorrespondenceSet& cs) {
  ConfidenceSummary s;
  if (cs.empty()) return s;
  s.min = s.max = cs.pairs.front().confidence;
  double sum = 0.0;
  for (const auto& p : cs.pairs) {
    s.min = std::min(s.min, p.confidence);
    s.max = std::max(s.max, p.confidence);
    sum += p.confidence;
  }
  s.mean = sum / static_cast<double>(cs.size());
  return s;
}

}  // namespace lodom
