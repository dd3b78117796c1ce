#include "lodom/se3.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "lodom/errors.hpp"

namespace lodom {

double Pose::param(int i) const {
  switch (i) {
    case 0: return rotation.w();
    case 1: return rotation.x();
    case 2: return rotation.y();
    case 3: return rotation.z();
    default: return translation[i - 4];
  }
}

void Pose::set_param(int i, double v) {
  switch (i) {
    case 0: rotation.w() = v; break;
    case 1: rotation.x() = v; break;
    case 2: rotation.y() = v; break;
    case 3: rotation.z() = v; break;
    default: translation[i - 4] = v; break;
  }
}

Pose compose(const Pose& a, const Pose& b) {
  Pose out;
  out.rotation = (a.rotation * b.rotation).normalized();
  out.translation = a.rotation * b.translation + a.translation;
  return out;
}

Pose inverse(const Pose& p) {
  Pose out;
  out.rotation = p.rotation.conjugate();
  out.translation = -(out.rotation * p.translation);
  return out;
}

Vec3 apply(const Pose& p, const Vec3& x) { return p.rotation * x + p.translation; }

double rotation_angle(const Pose& p) {
  const double w = std::min(1.0, std::abs(p.rotation.normalized().w()));
  return 2.0 * std::acos(w);
}

double frobenius_dev(const Pose& p) {
  return (p.rotation_matrix() - Mat3::Identity()).squaredNorm();
}

Pose normalized(const Pose& p) { return Pose(p.rotation, p.translation); }

Pose rot_z(double angle_rad) {
  return Pose(Quat(Eigen::AngleAxisd(angle_rad, Vec3::UnitZ())), Vec3::Zero());
}

Pose from_axis_angle(const Vec3& axis, double angle_rad, const Vec3& t) {
  return Pose(Quat(Eigen::AngleAxisd(angle_rad, axis.normalized())), t);
}

std::array<Mat3, 4> rotation_matrix_derivatives(const Quat& unit_q) {
  const double w = unit_q.w(), x = unit_q.x(), y = unit_q.y(), z = unit_q.z();
  std::array<Mat3, 4> d;
  d[0] << 0, -z, y,
          z, 0, -x,
          -y, x, 0;
  d[1] << 0, y, z,
          y, -2 * x, -w,
          z, w, -2 * x;
  d[2] << -2 * y, x, w,
          x, 0, z,
          -w, z, -2 * y;
  d[3] << -2 * z, -w, x,
          w, -2 * z, y,
          x, y, 0;
  for (auto& m : d) m *= 2.0;
  return d;
}

Eigen::Matrix4d normalization_jacobian(const Quat& q) {
  Eigen::Vector4d v(q.w(), q.x(), q.y(), q.z());
  const double n = v.norm();
  const Eigen::Vector4d u = v / n;
  return (Eigen::Matrix4d::Identity() - u * u.transpose()) / n;
}

Pose parse_kitti_pose_row(const std::string& line, int line_number) {
  std::istringstream iss(line);
  std::array<double, 12> v{};
  for (int i = 0; i < 12; ++i) {
    if (!(iss >> v[i])) {
      std::ostringstream msg;
      msg << "pose row";
      if (line_number >= 0) msg << " " << line_number;
      msg << ": expected 12 values, got " << i;
      throw DataError(msg.str());
    }
  }
  double extra;
  if (iss >> extra) {
    std::ostringstream msg;
    msg << "pose row";
    if (line_number >= 0) msg << " " << line_number;
    msg << ": more than 12 values";
    throw DataError(msg.str());
  }
  Mat3 r;
  r << v[0], v[1], v[2],
       v[4], v[5], v[6],
       v[8], v[9], v[10];
  Vec3 t(v[3], v[7], v[11]);
  return Pose(Quat(r), t);
}

std::string format_kitti_pose_row(const Pose& p) {
  const Mat3 r = p.rotation_matrix();
  const Vec3& t = p.translation;
  const double v[12] = {r(0, 0), r(0, 1), r(0, 2), t[0],
                        r(1, 0), r(1, 1), r(1, 2), t[1],
                        r(2, 0), r(2, 1), r(2, 2), t[2]};
  char buf[40];
  std::string out;
  out.reserve(12 * 18);
  for (int i = 0; i < 12; ++i) {
    std::snprintf(buf, sizeof(buf), "%.8e", v[i]);
    if (i) out += ' ';
    out += buf;
  }
  return out;
}

std::vector<Pose> read_kitti_poses(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open pose file: " + file.string());
  std::vector<Pose> poses;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    poses.push_back(parse_kitti_pose_row(line, line_number));
  }
  return poses;
}

void write_kitti_poses(const std::filesystem::path& file, const std::vector<Pose>& poses) {
  std::ofstream out(file);
  if (!out) throw DataError("cannot open pose file for writing: " + file.string());
  for (const Pose& p : poses) out << format_kitti_pose_row(p) << '\n';
}

}  // namespace lodom
