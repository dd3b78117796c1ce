#include "lodom/solver.hpp"

#include <algorithm>
#include <cmath>

#include "lodom/errors.hpp"

namespace lodom {

namespace {

struct Iterate {
  Pose pose;
  double s_alpha = 0.0;
  double s_beta = 0.0;
};

// Everything held fixed within one outer iteration (block-coordinate scheme):
// the association with solved confidences and the rectified stop-gradient
// target.
struct Context {
  CorrespondenceSet cs;
  Pose rectified;
  bool has_rectified = false;
  bool icp_failed = false;
};

struct Evaluation {
  LossReport report;
  PoseGrad grad_pose = PoseGrad::Zero();
  double grad_s_alpha = 0.0;
  double grad_s_beta = 0.0;
};

Context build_context(const PointCloud& prev, const PointCloud& curr, const Pose& pose,
                      const SolverConfig& cfg) {
  Context ctx;
  const PointCloud transformed = transform_cloud(prev, pose);
  ctx.cs = associate(curr, transformed, cfg.assoc_max_dist);
  if (ctx.cs.empty()) return ctx;

  const ConfidenceProvider provider = cfg.use_confidence
                                          ? range_confidence_provider(cfg.weights.gamma)
                                          : uniform_confidence_provider();
  provider(ctx.cs);

  try {
    const IcpResult icp = icp_refine(curr, transformed, provider, cfg.icp);
    ctx.rectified = rectify(pose, icp.delta);
    ctx.has_rectified = true;
  } catch (const NumericalError&) {
    ctx.icp_failed = true;  // gradient-only fallback: w3 = w4 = 0 for this pair
  }
  return ctx;
}

Evaluation evaluate(const PointCloud& prev, const PointCloud& curr, const Context& ctx,
                    const Iterate& it, const SolverConfig& cfg) {
  const LossWeights& w = cfg.weights;
  Evaluation ev;

  const LossValue data = cfg.use_spherical
                             ? spherical_loss(curr, prev, ctx.cs, it.pose, cfg.use_confidence)
                             : euclidean_loss(curr, prev, ctx.cs, it.pose);
  const LossValue ra = range_alignment_loss(curr, prev, ctx.cs, it.pose, w.gamma);

  double l_tr = 0.0;
  double l_fs = 0.0;
  LossWeights effective = w;
  if (ctx.has_rectified) {
    const UncertaintyParam sa{it.s_alpha};
    const UncertaintyParam sb{it.s_beta};
    if (w.w3 > 0.0) {
      const ResidualLoss tr = transformation_residual_loss(it.pose, ctx.rectified, sa, sb);
      l_tr = tr.value;
      ev.grad_pose += w.w3 * tr.grad;
      ev.grad_s_alpha += w.w3 * tr.d_s_alpha;
      ev.grad_s_beta += w.w3 * tr.d_s_beta;
    }
    if (w.w4 > 0.0) {
      const double layer_w =
          w.flow_layer_weights.empty() ? 1.0 : w.flow_layer_weights.front();
      const FlowLoss fs = rigid_flow_loss(curr, it.pose, ctx.rectified, layer_w, sa);
      l_fs = fs.value;
      ev.grad_pose += w.w4 * fs.grad;
      ev.grad_s_alpha += w.w4 * fs.d_s_alpha;
    }
  } else {
    effective.w3 = 0.0;
    effective.w4 = 0.0;
  }

  ev.grad_pose += w.w1 * data.grad + w.w2 * ra.grad;
  ev.report = composite_loss(data.value, ra.value, l_tr, l_fs, ctx.cs.size(), effective);
  return ev;
}

// Quaternion gradients carry range-squared lever arms (d(Rx)/dq ~ |x|), so a
// shared step starves the translation block. A constant diagonal metric that
// divides the quaternion block by the mean squared target range makes both
// blocks' curvature O(1).
Iterate retract(const Iterate& it, const PoseGrad& gp, double gsa, double gsb, double step,
                double quat_metric, double s_limit) {
  Iterate out = it;
  for (int i = 0; i < 4; ++i)
    out.pose.set_param(i, it.pose.param(i) - step * gp[i] / quat_metric);
  for (int i = 4; i < Pose::kNumParams; ++i)
    out.pose.set_param(i, it.pose.param(i) - step * gp[i]);
  out.pose = normalized(out.pose);
  out.s_alpha = std::clamp(it.s_alpha - step * gsa, -s_limit, s_limit);
  out.s_beta = std::clamp(it.s_beta - step * gsb, -s_limit, s_limit);
  return out;
}

double mean_squared_range(const PointCloud& cloud) {
  double sum = 0.0;
  for (const Point& p : cloud.points) sum += p.position.squaredNorm();
  return std::max(sum / static_cast<double>(cloud.size()), 1.0);
}

}  // namespace

PairEstimate estimate_pair(const PointCloud& prev, const PointCloud& curr, const Pose& init,
                           const SolverConfig& cfg) {
  PairEstimate best;
  best.pose = normalized(init);
  best.rectified = best.pose;

  Iterate it{best.pose, 0.0, 0.0};
  const double quat_metric = mean_squared_range(curr);
  bool have_best = false;
  double previous_loss = 0.0;
  bool have_previous = false;

  for (int outer = 0; outer <= cfg.max_outer_iterations; ++outer) {
    const Context ctx = build_context(prev, curr, it.pose, cfg);
    if (ctx.cs.empty()) {
      if (!have_best) {
        best.association_empty = true;
        best.converged = false;
        best.outer_iterations = outer;
      }
      return best;
    }

    const Evaluation ev = evaluate(prev, curr, ctx, it, cfg);
    const double loss = ev.report.total;

    if (!have_best || loss < best.report.total) {
      have_best = true;
      best.pose = it.pose;
      best.report = ev.report;
      best.rectified = ctx.has_rectified ? ctx.rectified : it.pose;
      best.confidence_summary = summarize_confidences(ctx.cs);
      best.outer_iterations = outer;
      best.s_alpha = it.s_alpha;
      best.s_beta = it.s_beta;
    }
    if (ctx.icp_failed) best.icp_fallback = true;

    if (have_previous && std::abs(loss - previous_loss) < cfg.convergence_tol) {
      best.converged = true;
      break;
    }
    previous_loss = loss;
    have_previous = true;
    if (outer == cfg.max_outer_iterations) break;

    // backtracking on the frozen context
    double step = cfg.step_size;
    bool accepted = false;
    Iterate candidate;
    for (int halving = 0; halving < 30; ++halving) {
      candidate = retract(it, ev.grad_pose, ev.grad_s_alpha, ev.grad_s_beta, step, cfg.s_limit);
      const Evaluation trial = evaluate(prev, curr, ctx, candidate, cfg);
      if (trial.report.total < loss) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      best.converged = true;  // no descent direction at machine scale
      break;
    }
    it = candidate;
  }
  return best;
}

SequenceResult run_sequence(const std::vector<PointCloud>& sweeps, const SolverConfig& cfg) {
  if (sweeps.size() < 2) throw ConfigError("run_sequence: need at least 2 sweeps");

  SequenceResult out;
  out.trajectory.reserve(sweeps.size());
  out.trajectory.push_back(Pose::identity());

  for (std::size_t k = 1; k < sweeps.size(); ++k) {
    Pose init = Pose::identity();
    if (cfg.init_mode == SolverConfig::InitMode::kConstantVelocity && k >= 2 &&
        !out.link_failed.back())
      init = out.pairs.back().pose;

    PairEstimate est;
    bool failed = false;
    if (sweeps[k - 1].empty() || sweeps[k].empty()) {
      failed = true;
    } else {
      try {
        est = estimate_pair(sweeps[k - 1], sweeps[k], init, cfg);
        failed = est.association_empty;
      } catch (const NumericalError&) {
        failed = true;
      }
    }
    if (failed) {
      est.pose = init;
      est.association_empty = true;
      est.converged = false;
    }

    out.pairs.push_back(est);
    out.link_failed.push_back(failed);
    out.trajectory.push_back(compose(out.trajectory.back(), inverse(est.pose)));
  }

  if (cfg.check_skip_pairs) {
    out.skip_consistency.assign(out.pairs.size(), 0.0);
    for (std::size_t k = 2; k < sweeps.size(); ++k) {
      if (sweeps[k - 2].empty() || sweeps[k].empty()) continue;
      if (out.link_failed[k - 2] || out.link_failed[k - 1]) continue;
      try {
        const Pose chained = compose(out.pairs[k - 1].pose, out.pairs[k - 2].pose);
        const PairEstimate skip = estimate_pair(sweeps[k - 2], sweeps[k], chained, cfg);
        if (!skip.association_empty) {
          const Pose diff = compose(inverse(skip.pose), chained);
          out.skip_consistency[k - 1] = diff.translation.norm();
        }
      } catch (const NumericalError&) {
        // diagnostic only; leave the entry at zero
      }
    }
  }
  return out;
}

}  // namespace lodom
