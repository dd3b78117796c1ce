#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "lodom/errors.hpp"
#include "lodom/losses.hpp"

using namespace lodom;

namespace {

PointCloud shell_cloud(std::mt19937& rng, int n, double lo = 2.0, double hi = 20.0) {
  std::uniform_real_distribution<double> mag(lo, hi);
  std::normal_distribution<double> gauss(0.0, 1.0);
  PointCloud c;
  for (int i = 0; i < n; ++i) {
    Point p;
    Vec3 dir(gauss(rng), gauss(rng), gauss(rng));
    p.position = mag(rng) * dir.normalized();
    c.points.push_back(p);
  }
  return c;
}

Pose small_random_pose(std::mt19937& rng, double max_angle = 0.1, double max_trans = 0.5) {
  std::uniform_real_distribution<double> a(-max_angle, max_angle);
  std::uniform_real_distribution<double> t(-max_trans, max_trans);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vec3 axis(gauss(rng), gauss(rng), gauss(rng));
  return from_axis_angle(axis.normalized(), a(rng), Vec3(t(rng), t(rng), t(rng)));
}

// single-pair set over explicit target/source points, |P_t| = target size
struct PairFixture {
  PointCloud target;
  PointCloud source;
  CorrespondenceSet cs;
};

PairFixture make_fixture(const std::vector<Vec3>& tgt, const std::vector<Vec3>& src,
                         const std::vector<double>& confidences) {
  PairFixture f;
  for (const Vec3& p : tgt) {
    Point pt;
    pt.position = p;
    f.target.points.push_back(pt);
  }
  for (const Vec3& p : src) {
    Point pt;
    pt.position = p;
    f.source.points.push_back(pt);
  }
  f.cs.target_size = f.target.size();
  for (std::size_t i = 0; i < std::min(tgt.size(), src.size()); ++i) {
    CorrespondencePair pair;
    pair.tgt_index = static_cast<int>(i);
    pair.src_index = static_cast<int>(i);
    pair.confidence = confidences[i];
    const Vec3& a = tgt[i];
    const Vec3& b = src[i];
    pair.euclid_dist = (a - b).norm();
    pair.range_diff = a.norm() - b.norm();
    pair.cos_angle = a.dot(b) / (a.norm() * b.norm());
    f.cs.pairs.push_back(pair);
  }
  return f;
}

template <typename F>
PoseGrad finite_diff(F f, const Pose& pose, double h = 1e-6) {
  PoseGrad g;
  for (int i = 0; i < Pose::kNumParams; ++i) {
    Pose hi = pose, lo = pose;
    hi.set_param(i, pose.param(i) + h);
    lo.set_param(i, pose.param(i) - h);
    g[i] = (f(hi) - f(lo)) / (2.0 * h);
  }
  return g;
}

double rel_grad_error(const PoseGrad& analytic, const PoseGrad& fd) {
  const double scale = std::max(fd.cwiseAbs().maxCoeff(), 1e-8);
  return (analytic - fd).cwiseAbs().maxCoeff() / scale;
}

}  // namespace

TEST_CASE("uncertainty wrapper") {
  CHECK(uncertainty({0.0}, 5.0).value == 5.0);
  CHECK(uncertainty({1.0}, 0.0).value == 1.0);
  CHECK(uncertainty({std::log(2.0)}, 2.0).value ==
        doctest::Approx(1.0 + std::log(2.0)).epsilon(1e-12));
  // d/ds = -e^{-s} l + 1
  CHECK(uncertainty({0.0}, 5.0).d_ds == doctest::Approx(-4.0));
  const double h = 1e-7;
  const double fd =
      (uncertainty({0.3 + h}, 2.0).value - uncertainty({0.3 - h}, 2.0).value) / (2 * h);
  CHECK(uncertainty({0.3}, 2.0).d_ds == doctest::Approx(fd).epsilon(1e-6));
}

TEST_CASE("spherical_loss: values") {
  // perfect alignment, all confidences 1 -> -pair_count / |P_t|
  std::mt19937 rng(3);
  PointCloud c = shell_cloud(rng, 25);
  auto positions = c.positions();
  auto f = make_fixture(positions, positions, std::vector<double>(25, 1.0));
  CHECK(spherical_loss(f.target, f.source, f.cs, Pose::identity(), true).value ==
        doctest::Approx(-1.0).epsilon(1e-12));

  // orthogonal rays -> 0
  auto ortho = make_fixture({{1, 0, 0}}, {{0, 1, 0}}, {1.0});
  CHECK(spherical_loss(ortho.target, ortho.source, ortho.cs, Pose::identity(), true).value ==
        doctest::Approx(0.0).epsilon(1e-12));

  // rays at 60 degrees, confidence 0.5, |P_t| = 1 -> -0.25
  const double ang = std::numbers::pi / 3.0;
  auto deg60 = make_fixture({{1, 0, 0}}, {{std::cos(ang), std::sin(ang), 0}}, {0.5});
  CHECK(spherical_loss(deg60.target, deg60.source, deg60.cs, Pose::identity(), true).value ==
        doctest::Approx(-0.25).epsilon(1e-12));

  // confidence off treats M as 1
  CHECK(spherical_loss(deg60.target, deg60.source, deg60.cs, Pose::identity(), false).value ==
        doctest::Approx(-0.5).epsilon(1e-12));

  CHECK_THROWS_AS(
      spherical_loss(f.target, f.source, CorrespondenceSet{}, Pose::identity(), true),
      NumericalError);
}

TEST_CASE("range_alignment_loss: values") {
  // perfect alignment, M = 1 -> 0
  auto perfect = make_fixture({{3, 0, 0}}, {{3, 0, 0}}, {1.0});
  CHECK(range_alignment_loss(perfect.target, perfect.source, perfect.cs, Pose::identity(),
                             1e-3).value == doctest::Approx(0.0));

  // one pair, d = 0.1, M = 1, gamma = 0 contribution -> 0.01
  auto off = make_fixture({{3.1, 0, 0}}, {{3.0, 0, 0}}, {1.0});
  CHECK(range_alignment_loss(off.target, off.source, off.cs, Pose::identity(), 1e-9).value ==
        doctest::Approx(0.01).epsilon(1e-9));

  // solved confidence at d^2 = 2*gamma: value = gamma (1 + ln 2)
  const double gamma = 1e-3;
  const double d = std::sqrt(2.0 * gamma);
  auto mid = make_fixture({{3.0 + d, 0, 0}}, {{3.0, 0, 0}}, {1.0});
  solve_confidences(mid.cs, gamma);
  CHECK(mid.cs.pairs[0].confidence == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(range_alignment_loss(mid.target, mid.source, mid.cs, Pose::identity(), gamma).value ==
        doctest::Approx(gamma * (1.0 + std::log(2.0))).epsilon(1e-9));
}

TEST_CASE("euclidean_loss: values") {
  auto perfect = make_fixture({{3, 0, 0}}, {{3, 0, 0}}, {1.0});
  CHECK(euclidean_loss(perfect.target, perfect.source, perfect.cs, Pose::identity()).value ==
        0.0);

  auto half = make_fixture({{3.5, 0, 0}}, {{3.0, 0, 0}}, {1.0});
  CHECK(euclidean_loss(half.target, half.source, half.cs, Pose::identity()).value ==
        doctest::Approx(0.25).epsilon(1e-12));

  auto two = make_fixture({{3, 0, 0}, {5, 0, 0}}, {{4, 0, 0}, {5, 0, 0}}, {1.0, 1.0});
  CHECK(euclidean_loss(two.target, two.source, two.cs, Pose::identity()).value ==
        doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("transformation_residual_loss: values") {
  std::mt19937 rng(5);
  const Pose p = small_random_pose(rng);
  CHECK(transformation_residual_loss(p, p, {0.0}, {0.0}).value == doctest::Approx(0.0));
  CHECK(transformation_residual_loss(p, p, {0.2}, {0.3}).value ==
        doctest::Approx(0.5).epsilon(1e-12));

  Pose shifted = p;
  shifted.translation += Vec3(0.1, 0, 0);
  CHECK(transformation_residual_loss(shifted, p, {0.0}, {0.0}).value ==
        doctest::Approx(0.01).epsilon(1e-9));
}

TEST_CASE("flow_target: values and inverse-transform consistency") {
  std::mt19937 rng(7);
  const PointCloud c = shell_cloud(rng, 30);

  for (const Vec3& f : flow_target(c, Pose::identity())) CHECK(f.norm() < 1e-15);

  const Pose lift(Quat::Identity(), Vec3(0.3, -0.2, 0.1));
  for (const Vec3& f : flow_target(c, lift)) CHECK((f - lift.translation).norm() < 1e-12);

  const std::vector<Vec3> one = flow_target(std::vector<Vec3>{{1, 0, 0}},
                                            rot_z(std::numbers::pi / 2));
  CHECK((one[0] - Vec3(1, 1, 0)).norm() < 1e-12);

  // x - F*(x) == inverse-transform of x, randomized
  for (int trial = 0; trial < 200; ++trial) {
    const Pose rect = small_random_pose(rng, 0.5, 2.0);
    const Vec3 x = c.points[trial % c.size()].position;
    const Vec3 f = flow_target(std::vector<Vec3>{x}, rect)[0];
    CHECK((x - f - apply(inverse(rect), x)).norm() < 1e-9);
  }
}

TEST_CASE("flow_supervision_loss: values and mismatch errors") {
  LossWeights w;
  w.flow_layer_weights = {1.0};
  std::vector<std::vector<Vec3>> pred{{Vec3(1, 2, 3), Vec3(0, 0, 1)}};
  std::vector<std::vector<Vec3>> tgt = pred;

  CHECK(flow_supervision_loss(pred, tgt, w, {0.0}) == 0.0);
  CHECK(flow_supervision_loss(pred, tgt, w, {0.4}) == doctest::Approx(0.4).epsilon(1e-12));

  std::vector<std::vector<Vec3>> pred1{{Vec3(0.3, 0, 0)}};
  std::vector<std::vector<Vec3>> tgt1{{Vec3(0, 0, 0)}};
  CHECK(flow_supervision_loss(pred1, tgt1, w, {0.0}) == doctest::Approx(0.09).epsilon(1e-12));

  std::vector<std::vector<Vec3>> bad{{Vec3(0, 0, 0)}, {Vec3(0, 0, 0)}};
  CHECK_THROWS_AS(flow_supervision_loss(bad, tgt1, w, {0.0}), std::invalid_argument);
  std::vector<std::vector<Vec3>> bad2{{Vec3(0, 0, 0), Vec3(1, 1, 1)}};
  CHECK_THROWS_AS(flow_supervision_loss(bad2, tgt1, w, {0.0}), std::invalid_argument);

  // two layers with decaying weights
  LossWeights w2;
  w2.flow_layer_weights = {1.0, 0.1};
  std::vector<std::vector<Vec3>> p2{{Vec3(0.1, 0, 0)}, {Vec3(0.2, 0, 0)}};
  std::vector<std::vector<Vec3>> t2{{Vec3(0, 0, 0)}, {Vec3(0, 0, 0)}};
  CHECK(flow_supervision_loss(p2, t2, w2, {0.0}) ==
        doctest::Approx(0.01 + 0.1 * 0.04).epsilon(1e-12));
}

TEST_CASE("rigid_flow_loss agrees with flow_supervision_loss on induced flows") {
  std::mt19937 rng(11);
  const PointCloud target = shell_cloud(rng, 40);
  const Pose pose = small_random_pose(rng);
  const Pose rect = small_random_pose(rng);
  const UncertaintyParam sa{0.17};

  const FlowLoss fl = rigid_flow_loss(target, pose, rect, 1.0, sa);

  LossWeights w;
  w.flow_layer_weights = {1.0};
  const std::vector<std::vector<Vec3>> pred{flow_target(target, pose)};
  const std::vector<std::vector<Vec3>> tgt{flow_target(target, rect)};
  CHECK(fl.value == doctest::Approx(flow_supervision_loss(pred, tgt, w, sa)).epsilon(1e-12));
}

TEST_CASE("composite_loss: weighted sum and linearity") {
  LossWeights w;
  w.w1 = 1;
  w.w2 = w.w3 = w.w4 = 1;
  CHECK(composite_loss(0, 0, 0, 0, 0, w).total == 0.0);
  CHECK(composite_loss(-1, 0, 0, 0, 1, w).total == doctest::Approx(-1.0));

  LossWeights table;
  table.w1 = 100;
  table.w2 = table.w3 = table.w4 = 1;
  const LossReport r = composite_loss(-0.9, 0.002, 0.01, 0.05, 10, table);
  CHECK(r.total == doctest::Approx(-89.938).epsilon(1e-12));
  CHECK(std::abs(r.total - (table.w1 * r.l_sr + table.w2 * r.l_ra + table.w3 * r.l_tr +
                            table.w4 * r.l_fs)) < 1e-12);

  LossWeights doubled = table;
  doubled.w1 *= 2;
  const LossReport r2 = composite_loss(-0.9, 0.002, 0.01, 0.05, 10, doubled);
  CHECK(r2.total - r.total == doctest::Approx(table.w1 * -0.9).epsilon(1e-9));

  const std::string row = loss_report_csv_row("0-1", r);
  CHECK(row.substr(0, 4) == "0-1,");
  CHECK(row.find(",10") != std::string::npos);
}

TEST_CASE("gradients: analytic vs central finite differences (assoc fixed)") {
  std::mt19937 rng(13);
  double worst = 0.0;
  for (int trial = 0; trial < 25; ++trial) {
    const PointCloud target = shell_cloud(rng, 120);
    const Pose gt = small_random_pose(rng, 0.05, 0.3);
    // source in the previous frame: x_{t-1} = gt^{-1}(x_t) plus jitter
    PointCloud source = transform_cloud(target, inverse(gt));
    std::normal_distribution<double> jitter(0.0, 0.01);
    for (auto& p : source.points)
      p.position += Vec3(jitter(rng), jitter(rng), jitter(rng));

    const Pose pose = small_random_pose(rng, 0.05, 0.3);
    const PointCloud transformed = transform_cloud(source, pose);
    CorrespondenceSet cs = associate(target, transformed, 5.0);
    REQUIRE(!cs.empty());
    solve_confidences(cs, 1e-3);

    const auto sph = spherical_loss(target, source, cs, pose, true);
    const auto sph_fd = finite_diff(
        [&](const Pose& p) { return spherical_loss(target, source, cs, p, true).value; },
        pose);
    worst = std::max(worst, rel_grad_error(sph.grad, sph_fd));

    const auto ra = range_alignment_loss(target, source, cs, pose, 1e-3);
    const auto ra_fd = finite_diff(
        [&](const Pose& p) {
          return range_alignment_loss(target, source, cs, p, 1e-3).value;
        },
        pose);
    worst = std::max(worst, rel_grad_error(ra.grad, ra_fd));

    const auto eu = euclidean_loss(target, source, cs, pose);
    const auto eu_fd = finite_diff(
        [&](const Pose& p) { return euclidean_loss(target, source, cs, p).value; }, pose);
    worst = std::max(worst, rel_grad_error(eu.grad, eu_fd));
  }
  CHECK(worst < 1e-4);
  MESSAGE("worst relative gradient error: ", worst);
}

TEST_CASE("gradients: residual and flow terms (incl. uncertainty params)") {
  std::mt19937 rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const Pose pred = small_random_pose(rng, 0.2, 1.0);
    const Pose rect = small_random_pose(rng, 0.2, 1.0);
    const UncertaintyParam sa{0.1}, sb{-0.2};

    const ResidualLoss tr = transformation_residual_loss(pred, rect, sa, sb);
    const PoseGrad tr_fd = finite_diff(
        [&](const Pose& p) { return transformation_residual_loss(p, rect, sa, sb).value; },
        pred);
    CHECK(rel_grad_error(tr.grad, tr_fd) < 1e-4);

    const double h = 1e-6;
    const double fd_sa = (transformation_residual_loss(pred, rect, {sa.s + h}, sb).value -
                          transformation_residual_loss(pred, rect, {sa.s - h}, sb).value) /
                         (2 * h);
    CHECK(tr.d_s_alpha == doctest::Approx(fd_sa).epsilon(1e-5));

    const PointCloud target = shell_cloud(rng, 60);
    const FlowLoss fl = rigid_flow_loss(target, pred, rect, 1.0, sa);
    const PoseGrad fl_fd = finite_diff(
        [&](const Pose& p) { return rigid_flow_loss(target, p, rect, 1.0, sa).value; }, pred);
    CHECK(rel_grad_error(fl.grad, fl_fd) < 1e-4);

    const double fd_fsa = (rigid_flow_loss(target, pred, rect, 1.0, {sa.s + h}).value -
                           rigid_flow_loss(target, pred, rect, 1.0, {sa.s - h}).value) /
                          (2 * h);
    CHECK(fl.d_s_alpha == doctest::Approx(fd_fsa).epsilon(1e-5));
  }
}

TEST_CASE("property: spherical loss bounds") {
  std::mt19937 rng(19);
  for (int trial = 0; trial < 20; ++trial) {
    const PointCloud target = shell_cloud(rng, 80);
    PointCloud source = target;
    for (auto& p : source.points) p.position += Vec3(0.2, -0.1, 0.05);
    CorrespondenceSet cs = associate(target, source, 5.0);
    solve_confidences(cs, 1e-3);
    const double v = spherical_loss(target, source, cs, Pose::identity(), true).value;
    const double normalized = v * static_cast<double>(cs.target_size) / cs.size();
    CHECK(normalized >= -1.0 - 1e-12);
    CHECK(normalized <= 1.0 + 1e-12);
  }
}

TEST_CASE("property: fixed Euclidean offset yields smaller angles at larger range") {
  const Vec3 offset(0.3, 0.4, 0.1);
  const Vec3 dir = Vec3(0.8, -0.5, 0.2).normalized();
  double prev_angle = std::numbers::pi;
  for (int i = 0; i < 60; ++i) {
    const double range = 2.0 + i * 1.5;
    const Vec3 x = range * dir;
    const Vec3 y = x + offset;
    const double angle = std::acos(std::clamp(x.dot(y) / (x.norm() * y.norm()), -1.0, 1.0));
    CHECK(angle < prev_angle);
    prev_angle = angle;
  }
}
