#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "lodom/cloud.hpp"

namespace lodom {

struct Primitive {
  enum class Kind { kPlane, kSphere, kBox };
  Kind kind = Kind::kPlane;
  Pose pose;    // local-to-world
  // plane: half-sizes along local x/y (<= 0 means unbounded);
  // sphere: radius in extent.x; box: half-extents
  Vec3 extent = Vec3::Ones();
};

struct RayGrid {
  int azimuth_steps = 1024;
  int elevation_rings = 64;
  double elevation_min_deg = -25.0;
  double elevation_max_deg = 3.0;
  double max_range = 120.0;
};

struct SceneSpec {
  std::vector<Primitive> primitives;
  RayGrid rays;
  double noise_sigma = 0.0;        // isotropic Gaussian position noise, meters
  double mover_fraction = 0.0;     // in [0, 1)
  Vec3 mover_offset = Vec3::Zero();  // world-frame displacement per frame step
  std::uint64_t seed = 0;
};

/// Throws ConfigError naming the offending field.
void validate_scene(const SceneSpec& scene);

/// Casts the ray grid (ring-major, azimuth-minor) from sensor_pose and
/// returns first hits in the sensor frame with analytic normals oriented
/// toward the sensor, unit reflectance, and seeded Gaussian position noise.
PointCloud render_sweep(const SceneSpec& scene, const Pose& sensor_pose = Pose::identity());

struct RenderedPair {
  PointCloud prev;
  PointCloud curr;
  Pose gt;  // frame transform: x_curr = gt(x_prev) for static points
};

/// Ground-truth-controlled frame pair: the sweep is cast once, and the second
/// frame re-expresses the same world hit points under `relative_motion`
/// (movers first displaced by mover_offset in the world frame, noise drawn
/// independently per frame). Static points therefore correspond exactly:
/// curr[i] == relative_motion(prev[i]) when noise_sigma == 0.
RenderedPair render_pair(const SceneSpec& scene, const Pose& relative_motion);

struct RenderedSequence {
  std::vector<PointCloud> sweeps;
  std::vector<Pose> gt_world_poses;  // sensor pose per frame, first = identity
};

/// Sequence under a constant per-frame sensor motion (world-pose increment);
/// frame k re-expresses the world points in the frame of sensor_step^k, with
/// movers advancing by k * mover_offset.
RenderedSequence render_sequence(const SceneSpec& scene, int frames, const Pose& sensor_step);

// Convenience scene builders used by tests and benchmarks.
Primitive make_plane(const Pose& pose, double half_x = -1.0, double half_y = -1.0);
Primitive make_sphere(const Vec3& center, double radius);
Primitive make_box(const Pose& pose, const Vec3& half_extent);

}  // namespace lodom
