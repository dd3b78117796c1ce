#include "lodom/evaluate.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "lodom/errors.hpp"

namespace lodom {

std::vector<double> path_length(const Trajectory& traj) {
  if (traj.empty()) throw NumericalError("path_length: empty trajectory");
  std::vector<double> out;
  out.reserve(traj.size());
  out.push_back(0.0);
  for (std::size_t i = 1; i < traj.size(); ++i)
    out.push_back(out.back() +
                  (traj.poses[i].translation - traj.poses[i - 1].translation).norm());
  return out;
}

std::vector<double> default_segment_lengths() {
  return {100.0, 200.0, 300.0, 400.0, 500.0, 600.0, 700.0, 800.0};
}

namespace {

// First frame j > i whose path length is >= dist[i] + len; -1 when the
// trajectory ends first.
int segment_end(const std::vector<double>& dist, std::size_t i, double len) {
  for (std::size_t j = i + 1; j < dist.size(); ++j)
    if (dist[j] - dist[i] >= len) return static_cast<int>(j);
  return -1;
}

}  // namespace

DriftResult segment_errors(const Trajectory& est, const Trajectory& gt,
                           const std::vector<double>& lengths, int start_stride) {
  if (est.size() != gt.size())
    throw NumericalError("segment_errors: trajectory length mismatch (" +
                         std::to_string(est.size()) + " vs " + std::to_string(gt.size()) + ")");
  if (est.empty()) throw NumericalError("segment_errors: empty trajectories");
  if (start_stride < 1) throw ConfigError("segment_errors: start_stride must be >= 1");

  const std::vector<double> dist = path_length(gt);

  DriftResult result;
  double t_sum = 0.0;
  double r_sum = 0.0;
  std::size_t nonempty_lengths = 0;

  for (double len : lengths) {
    LengthErrors le;
    le.length = len;
    double t_acc = 0.0;
    double r_acc = 0.0;
    for (std::size_t i = 0; i < gt.size(); i += static_cast<std::size_t>(start_stride)) {
      const int j = segment_end(dist, i, len);
      if (j < 0) break;  // later starts cannot reach the length either

      const Pose gt_rel = compose(inverse(gt.poses[i]), gt.poses[j]);
      const Pose est_rel = compose(inverse(est.poses[i]), est.poses[j]);
      const Pose err = compose(inverse(est_rel), gt_rel);

      t_acc += err.translation.norm() / len;
      r_acc += rotation_angle(err) / len;
      le.segments += 1;
    }
    if (le.segments > 0) {
      le.t_rel = 100.0 * t_acc / static_cast<double>(le.segments);
      le.r_rel = (180.0 / std::numbers::pi) * 100.0 * r_acc / static_cast<double>(le.segments);
      t_sum += le.t_rel;
      r_sum += le.r_rel;
      nonempty_lengths += 1;
      result.total_segments += le.segments;
    }
    result.per_length.push_back(le);
  }

  if (nonempty_lengths > 0) {
    result.t_rel = t_sum / static_cast<double>(nonempty_lengths);
    result.r_rel = r_sum / static_cast<double>(nonempty_lengths);
  }
  return result;
}

std::string drift_csv(const DriftResult& r) {
  std::ostringstream out;
  out << "length_m,t_rel_percent,r_rel_deg_per_100m,segments\n";
  char buf[128];
  for (const LengthErrors& le : r.per_length) {
    std::snprintf(buf, sizeof(buf), "%.0f,%.9e,%.9e,%zu\n", le.length, le.t_rel, le.r_rel,
                  le.segments);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "avg,%.9e,%.9e,%zu\n", r.t_rel, r.r_rel, r.total_segments);
  out << buf;
  return out.str();
}

std::string drift_summary(const DriftResult& r) {
  std::ostringstream out;
  char buf[160];
  if (r.empty()) {
    out << "no segment reached the requested lengths (trajectory too short)\n";
    return out.str();
  }
  std::snprintf(buf, sizeof(buf), "t_rel: %.4f %%   r_rel: %.4f deg/100m   (%zu segments)\n",
                r.t_rel, r.r_rel, r.total_segments);
  out << buf;
  for (const LengthErrors& le : r.per_length) {
    if (le.segments == 0) {
      std::snprintf(buf, sizeof(buf), "  %4.0f m: no segments\n", le.length);
    } else {
      std::snprintf(buf, sizeof(buf), "  %4.0f m: t_rel %.4f %%  r_rel %.4f deg/100m  (%zu)\n",
                    le.length, le.t_rel, le.r_rel, le.segments);
    }
    out << buf;
  }
  return out.str();
}

}  // namespace lodom
