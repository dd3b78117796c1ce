#include "lodom/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "lodom/errors.hpp"

namespace lodom {

void validate_scene(const SceneSpec& scene) {
  if (scene.primitives.empty()) throw ConfigError("scene spec: primitives must not be empty");
  if (!(scene.mover_fraction >= 0.0 && scene.mover_fraction < 1.0))
    throw ConfigError("scene spec: mover_fraction must be in [0, 1)");
  if (scene.noise_sigma < 0.0) throw ConfigError("scene spec: noise_sigma must be >= 0");
  if (scene.rays.max_range <= 0.0) throw ConfigError("scene spec: rays.max_range must be > 0");
  if (scene.rays.azimuth_steps < 1)
    throw ConfigError("scene spec: rays.azimuth_steps must be >= 1");
  if (scene.rays.elevation_rings < 1)
    throw ConfigError("scene spec: rays.elevation_rings must be >= 1");
  for (const Primitive& p : scene.primitives) {
    if (p.kind == Primitive::Kind::kSphere && p.extent.x() <= 0.0)
      throw ConfigError("scene spec: sphere radius (extent.x) must be > 0");
    if (p.kind == Primitive::Kind::kBox && (p.extent.array() <= 0.0).any())
      throw ConfigError("scene spec: box half-extents must be > 0");
  }
}

namespace {

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  Vec3 normal_world = Vec3::Zero();
};

std::optional<Hit> intersect_plane(const Primitive& prim, const Vec3& origin, const Vec3& dir) {
  const Pose inv = inverse(prim.pose);
  const Vec3 o = apply(inv, origin);
  const Vec3 d = inv.rotation * dir;
  if (std::abs(d.z()) < 1e-12) return std::nullopt;
  const double t = -o.z() / d.z();
  if (t <= 1e-9) return std::nullopt;
  const Vec3 local = o + t * d;
  if (prim.extent.x() > 0.0 && std::abs(local.x()) > prim.extent.x()) return std::nullopt;
  if (prim.extent.y() > 0.0 && std::abs(local.y()) > prim.extent.y()) return std::nullopt;
  return Hit{t, prim.pose.rotation * Vec3::UnitZ()};
}

std::optional<Hit> intersect_sphere(const Primitive& prim, const Vec3& origin, const Vec3& dir) {
  const Vec3 oc = origin - prim.pose.translation;
  const double radius = prim.extent.x();
  const double b = dir.dot(oc);
  const double c = oc.squaredNorm() - radius * radius;
  const double disc = b * b - c;
  if (disc < 0.0) return std::nullopt;
  const double sq = std::sqrt(disc);
  double t = -b - sq;
  if (t <= 1e-9) t = -b + sq;
  if (t <= 1e-9) return std::nullopt;
  const Vec3 hit = origin + t * dir;
  return Hit{t, (hit - prim.pose.translation) / radius};
}

std::optional<Hit> intersect_box(const Primitive& prim, const Vec3& origin, const Vec3& dir) {
  const Pose inv = inverse(prim.pose);
  const Vec3 o = apply(inv, origin);
  const Vec3 d = inv.rotation * dir;

  double t_enter = -std::numeric_limits<double>::infinity();
  double t_exit = std::numeric_limits<double>::infinity();
  int enter_axis = -1;
  double enter_sign = 1.0;

  for (int a = 0; a < 3; ++a) {
    const double e = prim.extent[a];
    if (std::abs(d[a]) < 1e-12) {
      if (std::abs(o[a]) > e) return std::nullopt;
      continue;
    }
    double t0 = (-e - o[a]) / d[a];
    double t1 = (e - o[a]) / d[a];
    double sign = -1.0;
    if (t0 > t1) {
      std::swap(t0, t1);
      sign = 1.0;
    }
    if (t0 > t_enter) {
      t_enter = t0;
      enter_axis = a;
      enter_sign = sign;
    }
    t_exit = std::min(t_exit, t1);
    if (t_enter > t_exit) return std::nullopt;
  }
  if (enter_axis < 0 || t_enter <= 1e-9) return std::nullopt;
  Vec3 local_normal = Vec3::Zero();
  local_normal[enter_axis] = enter_sign;
  return Hit{t_enter, prim.pose.rotation * local_normal};
}

std::optional<Hit> intersect(const Primitive& prim, const Vec3& origin, const Vec3& dir) {
  switch (prim.kind) {
    case Primitive::Kind::kPlane: return intersect_plane(prim, origin, dir);
    case Primitive::Kind::kSphere: return intersect_sphere(prim, origin, dir);
    case Primitive::Kind::kBox: return intersect_box(prim, origin, dir);
  }
  return std::nullopt;
}

struct WorldHit {
  Vec3 position;
  Vec3 normal;
};

// Ring-major, azimuth-minor first hits in the world frame.
std::vector<WorldHit> cast_rays(const SceneSpec& scene, const Pose& sensor_pose) {
  const RayGrid& g = scene.rays;
  const Vec3 origin = sensor_pose.translation;
  const Mat3 r_sensor = sensor_pose.rotation_matrix();
  constexpr double kDeg = std::numbers::pi / 180.0;

  std::vector<WorldHit> hits;
  hits.reserve(static_cast<std::size_t>(g.elevation_rings) * g.azimuth_steps);

  for (int ring = 0; ring < g.elevation_rings; ++ring) {
    const double frac =
        g.elevation_rings == 1 ? 0.0 : static_cast<double>(ring) / (g.elevation_rings - 1);
    const double elev = kDeg * (g.elevation_min_deg +
                                frac * (g.elevation_max_deg - g.elevation_min_deg));
    for (int az = 0; az < g.azimuth_steps; ++az) {
      const double azimuth = 2.0 * std::numbers::pi * az / g.azimuth_steps;
      const Vec3 dir_sensor(std::cos(elev) * std::cos(azimuth),
                            std::cos(elev) * std::sin(azimuth), std::sin(elev));
      const Vec3 dir_world = r_sensor * dir_sensor;

      Hit best;
      for (const Primitive& prim : scene.primitives) {
        const auto h = intersect(prim, origin, dir_world);
        if (h && h->t < best.t) best = *h;
      }
      if (best.t <= scene.rays.max_range)
        hits.push_back({origin + best.t * dir_world, best.normal_world});
    }
  }
  return hits;
}

Point make_point(const Vec3& pos_sensor, const Vec3& normal_sensor) {
  Point p;
  p.position = pos_sensor;
  p.normal = normal_sensor.dot(-pos_sensor) < 0.0 ? Vec3(-normal_sensor) : normal_sensor;
  p.reflectance = 1.0;
  return p;
}

void add_noise(PointCloud& cloud, double sigma, std::uint64_t seed) {
  if (sigma <= 0.0) return;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, sigma);
  for (Point& p : cloud.points)
    p.position += Vec3(gauss(rng), gauss(rng), gauss(rng));
}

std::vector<bool> pick_movers(std::size_t n, double fraction, std::uint64_t seed) {
  std::vector<bool> mover(n, false);
  const std::size_t count = static_cast<std::size_t>(std::floor(fraction * n));
  if (count == 0) return mover;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(seed ^ 0x6d6f766572ULL);  // independent stream for selection
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t i = 0; i < count; ++i) mover[order[i]] = true;
  return mover;
}

// Re-express world hits in the frame reached by frame_transform, with movers
// advanced by `steps` offsets.
PointCloud express_frame(const std::vector<WorldHit>& hits, const std::vector<bool>& mover,
                         const Pose& frame_transform, const Vec3& mover_offset, int steps,
                         int frame_id) {
  PointCloud cloud;
  cloud.frame_id = frame_id;
  cloud.points.reserve(hits.size());
  const Mat3 r = frame_transform.rotation_matrix();
  for (std::size_t i = 0; i < hits.size(); ++i) {
    Vec3 world = hits[i].position;
    if (mover[i]) world += static_cast<double>(steps) * mover_offset;
    cloud.points.push_back(make_point(apply(frame_transform, world), r * hits[i].normal));
  }
  return cloud;
}

}  // namespace

PointCloud render_sweep(const SceneSpec& scene, const Pose& sensor_pose) {
  validate_scene(scene);
  const std::vector<WorldHit> hits = cast_rays(scene, sensor_pose);
  const Pose world_to_sensor = inverse(sensor_pose);
  const Mat3 r = world_to_sensor.rotation_matrix();

  PointCloud cloud;
  cloud.points.reserve(hits.size());
  for (const WorldHit& h : hits)
    cloud.points.push_back(make_point(apply(world_to_sensor, h.position), r * h.normal));
  add_noise(cloud, scene.noise_sigma, scene.seed);
  return cloud;
}

RenderedPair render_pair(const SceneSpec& scene, const Pose& relative_motion) {
  validate_scene(scene);
  const std::vector<WorldHit> hits = cast_rays(scene, Pose::identity());
  const std::vector<bool> mover = pick_movers(hits.size(), scene.mover_fraction, scene.seed);

  RenderedPair pair;
  pair.gt = relative_motion;
  pair.prev = express_frame(hits, mover, Pose::identity(), scene.mover_offset, 0, 0);
  pair.curr = express_frame(hits, mover, relative_motion, scene.mover_offset, 1, 1);
  add_noise(pair.prev, scene.noise_sigma, scene.seed + 1);
  add_noise(pair.curr, scene.noise_sigma, scene.seed + 2);
  return pair;
}

RenderedSequence render_sequence(const SceneSpec& scene, int frames, const Pose& sensor_step) {
  validate_scene(scene);
  if (frames < 1) throw ConfigError("render_sequence: frames must be >= 1");

  const std::vector<WorldHit> hits = cast_rays(scene, Pose::identity());
  const std::vector<bool> mover = pick_movers(hits.size(), scene.mover_fraction, scene.seed);

  RenderedSequence seq;
  Pose world_pose = Pose::identity();
  for (int k = 0; k < frames; ++k) {
    PointCloud sweep =
        express_frame(hits, mover, inverse(world_pose), scene.mover_offset, k, k);
    add_noise(sweep, scene.noise_sigma, scene.seed + 1 + static_cast<std::uint64_t>(k));
    seq.sweeps.push_back(std::move(sweep));
    seq.gt_world_poses.push_back(world_pose);
    world_pose = compose(world_pose, sensor_step);
  }
  return seq;
}

Primitive make_plane(const Pose& pose, double half_x, double half_y) {
  Primitive p;
  p.kind = Primitive::Kind::kPlane;
  p.pose = pose;
  p.extent = Vec3(half_x, half_y, 0.0);
  return p;
}

Primitive make_sphere(const Vec3& center, double radius) {
  Primitive p;
  p.kind = Primitive::Kind::kSphere;
  p.pose = Pose(Quat::Identity(), center);
  p.extent = Vec3(radius, 0.0, 0.0);
  return p;
}

Primitive make_box(const Pose& pose, const Vec3& half_extent) {
  Primitive p;
  p.kind = Primitive::Kind::kBox;
  p.pose = pose;
  p.extent = half_extent;
  return p;
}

}  // namespace lodom
