#include "lodom/cloud.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <tuple>

#include "lodom/errors.hpp"

namespace lodom {

std::vector<Vec3> PointCloud::positions() const {
  std::vector<Vec3> out;
  out.reserve(points.size());
  for (const Point& p : points) out.push_back(p.position);
  return out;
}

PointCloud filter_returns(const PointCloud& cloud, double min_range) {
  PointCloud out;
  out.frame_id = cloud.frame_id;
  out.points.reserve(cloud.points.size());
  for (const Point& p : cloud.points) {
    if (!p.position.allFinite() || !p.normal.allFinite() || !std::isfinite(p.reflectance))
      continue;
    if (p.position.norm() < min_range) continue;
    out.points.push_back(p);
  }
  return out;
}

PointCloud voxel_downsample(const PointCloud& cloud, const Vec3& cell_size) {
  if ((cell_size.array() <= 0.0).any())
    throw ConfigError("voxel_downsample: cell_size components must be > 0");

  struct Acc {
    Vec3 pos_sum = Vec3::Zero();
    Vec3 normal_sum = Vec3::Zero();
    double refl_sum = 0.0;
    int count = 0;
  };
  using Key = std::tuple<std::int64_t, std::int64_t, std::int64_t>;
  // std::map keeps cells in ascending key order, which fixes the output order
  std::map<Key, Acc> cells;

  for (const Point& p : cloud.points) {
    Key key{static_cast<std::int64_t>(std::floor(p.position.x() / cell_size.x())),
            static_cast<std::int64_t>(std::floor(p.position.y() / cell_size.y())),
            static_cast<std::int64_t>(std::floor(p.position.z() / cell_size.z()))};
    Acc& a = cells[key];
    a.pos_sum += p.position;
    a.normal_sum += p.normal;
    a.refl_sum += p.reflectance;
    a.count += 1;
  }

  PointCloud out;
  out.frame_id = cloud.frame_id;
  out.points.reserve(cells.size());
  for (const auto& [key, a] : cells) {
    Point p;
    const double inv = 1.0 / a.count;
    p.position = a.pos_sum * inv;
    p.reflectance = a.refl_sum * inv;
    Vec3 n = a.normal_sum * inv;
    const double nn = n.norm();
    p.normal = nn < 1e-6 ? Vec3::Zero() : Vec3(n / nn);
    out.points.push_back(p);
  }
  return out;
}

PointCloud estimate_normals(const PointCloud& cloud, int k) {
  if (cloud.empty()) throw ConfigError("estimate_normals: empty cloud");
  PointCloud out = cloud;
  if (static_cast<int>(cloud.size()) < k + 1) {
    for (Point& p : out.points) p.normal = Vec3::Zero();
    return out;
  }

  const KdTree index(cloud.positions());
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const Vec3& center = cloud.points[i].position;
    auto nbs = index.knearest(center, k + 1);
    std::vector<Vec3> diffs;
    diffs.reserve(k);
    for (const auto& nb : nbs) {
      if (nb.index == static_cast<int>(i)) continue;
      if (static_cast<int>(diffs.size()) == k) break;
      diffs.push_back(cloud.points[nb.index].position - center);
    }
    // consecutive cross products around the point, ordered by azimuth about
    // the viewing ray (grazing surfaces aside, diffs are near the tangent
    // plane, which the ray-orthogonal basis parameterizes cleanly)
    Vec3 view = center.norm() > 1e-9 ? Vec3(center.normalized()) : Vec3::UnitZ();
    Vec3 e1 = view.cross(std::abs(view.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX()).normalized();
    Vec3 e2 = view.cross(e1);
    std::sort(diffs.begin(), diffs.end(), [&](const Vec3& a, const Vec3& b) {
      return std::atan2(a.dot(e2), a.dot(e1)) < std::atan2(b.dot(e2), b.dot(e1));
    });
    Vec3 sum = Vec3::Zero();
    for (std::size_t j = 0; j < diffs.size(); ++j)
      sum += diffs[j].cross(diffs[(j + 1) % diffs.size()]);
    sum /= static_cast<double>(diffs.size());

    if (sum.norm() < 1e-8) {
      out.points[i].normal = Vec3::Zero();
      continue;
    }
    Vec3 n = sum.normalized();
    if (n.dot(-center) < 0.0) n = -n;  // face the sensor
    out.points[i].normal = n;
  }
  return out;
}

KdTree build_nn_index(const PointCloud& cloud) { return KdTree(cloud.positions()); }

PointCloud transform_cloud(const PointCloud& cloud, const Pose& pose) {
  PointCloud out = cloud;
  const Mat3 r = pose.rotation_matrix();
  for (Point& p : out.points) {
    p.position = r * p.position + pose.translation;
    p.normal = r * p.normal;
  }
  return out;
}

PointCloud prepare_sweep(const PointCloud& raw, const PrepConfig& cfg) {
  PointCloud cloud = filter_returns(raw, cfg.min_range);
  if (cloud.empty()) return cloud;

  bool has_normals = false;
  if (cfg.keep_existing_normals) {
    for (const Point& p : cloud.points) {
      if (p.normal.squaredNorm() > 0.0) {
        has_normals = true;
        break;
      }
    }
  }
  if (!has_normals) cloud = estimate_normals(cloud, cfg.normal_neighbors);
  return voxel_downsample(cloud, cfg.voxel_cell);
}

PointCloud read_velodyne_bin(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary | std::ios::ate);
  if (!in) throw DataError("cannot open sweep file: " + file.string());
  const std::streamoff bytes = in.tellg();
  if (bytes % 16 != 0)
    throw DataError("sweep file " + file.string() + ": length " + std::to_string(bytes) +
                    " is not a multiple of 16 bytes");
  in.seekg(0);
  const std::size_t n = static_cast<std::size_t>(bytes / 16);
  std::vector<float> raw(n * 4);
  in.read(reinterpret_cast<char*>(raw.data()), bytes);
  if (!in) throw DataError("short read on sweep file: " + file.string());

  PointCloud cloud;
  cloud.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Point p;
    p.position = Vec3(raw[4 * i], raw[4 * i + 1], raw[4 * i + 2]);
    p.reflectance = std::clamp<double>(raw[4 * i + 3], 0.0, 1.0);
    cloud.points.push_back(p);
  }
  return cloud;
}

void write_velodyne_bin(const std::filesystem::path& file, const PointCloud& cloud) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw DataError("cannot open sweep file for writing: " + file.string());
  std::vector<float> raw;
  raw.reserve(cloud.points.size() * 4);
  for (const Point& p : cloud.points) {
    raw.push_back(static_cast<float>(p.position.x()));
    raw.push_back(static_cast<float>(p.position.y()));
    raw.push_back(static_cast<float>(p.position.z()));
    raw.push_back(static_cast<float>(p.reflectance));
  }
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size() * sizeof(float)));
}

}  // namespace lodom
