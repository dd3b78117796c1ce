#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "lodom/kdtree.hpp"
#include "lodom/se3.hpp"

namespace lodom {

struct Point {
  Vec3 position = Vec3::Zero();
  Vec3 normal = Vec3::Zero();  // unit length, or exactly zero (degenerate marker)
  double reflectance = 0.0;    // in [0, 1]
};

struct PointCloud {
  std::vector<Point> points;
  int frame_id = 0;

  bool empty() const { return points.empty(); }
  std::size_t size() const { return points.size(); }

  std::vector<Vec3> positions() const;
};

/// Drops non-finite points and sensor self-returns (range < min_range).
PointCloud filter_returns(const PointCloud& cloud, double min_range = 0.5);

/// One output point per occupied cell: the arithmetic mean of all seven point
/// components, normal renormalized afterwards (zero if the mean collapses).
/// Cells are keyed by floor(coord / cell_size) anchored at the sensor origin;
/// output is ordered by ascending (kx, ky, kz) cell key.
PointCloud voxel_downsample(const PointCloud& cloud, const Vec3& cell_size);

/// Per-point normals from the normalized mean of cross products between
/// consecutive (azimuth-sorted) difference vectors to the k nearest
/// neighbors, oriented toward the sensor origin. Collinear neighborhoods get
/// the zero sentinel; clouds with fewer than k+1 points get all-zero normals.
PointCloud estimate_normals(const PointCloud& cloud, int k = 4);

/// Exact NN index over the cloud's positions. Throws NumericalError if empty.
KdTree build_nn_index(const PointCloud& cloud);

/// Positions mapped by the pose, normals by its rotation only.
PointCloud transform_cloud(const PointCloud& cloud, const Pose& pose);

struct PrepConfig {
  Vec3 voxel_cell{0.1, 0.1, 0.2};
  int normal_neighbors = 4;
  double min_range = 0.5;
  // estimate normals only when the cloud carries none (synthetic sweeps come
  // with analytic normals)
  bool keep_existing_normals = true;
};

/// Ingestion pipeline: filter -> normals on the raw cloud -> voxel average.
PointCloud prepare_sweep(const PointCloud& raw, const PrepConfig& cfg = {});

// --- KITTI velodyne binary format --------------------------------------------
// Little-endian float32 records (x, y, z, reflectance), no header.

/// Reads a raw sweep; validates that the file length is a multiple of 16
/// bytes. No filtering is applied here.
PointCloud read_velodyne_bin(const std::filesystem::path& file);
void write_velodyne_bin(const std::filesystem::path& file, const PointCloud& cloud);

}  // namespace lodom
