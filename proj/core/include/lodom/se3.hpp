#pragma once

#include <Eigen/Dense>
#include <array>
#include <filesystem>
#include <string>
#include <vector>

namespace lodom {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

/// Rigid motion as unit quaternion + translation. Rotation matrices are
/// materialized on demand; the quaternion is renormalized after every
/// composing operation so chains of poses do not drift.
struct Pose {
  Quat rotation{1.0, 0.0, 0.0, 0.0};
  Vec3 translation{0.0, 0.0, 0.0};

  Pose() = default;
  Pose(const Quat& q, const Vec3& t) : rotation(q.normalized()), translation(t) {}

  static Pose identity() { return {}; }

  Mat3 rotation_matrix() const { return rotation.toRotationMatrix(); }

  /// Parameter chart used by the optimizer and finite-difference checks:
  /// index 0..3 = quaternion (w,x,y,z), 4..6 = translation. Setting a
  /// quaternion component does NOT renormalize; callers retract explicitly.
  double param(int i) const;
  void set_param(int i, double v);
  static constexpr int kNumParams = 7;
};

Pose compose(const Pose& a, const Pose& b);  // applies b first, then a
Pose inverse(const Pose& p);
Vec3 apply(const Pose& p, const Vec3& x);

/// Rotation angle in [0, pi] via 2*acos(|w|).
double rotation_angle(const Pose& p);

/// Squared Frobenius norm of (R - I); zero iff the rotation is identity.
double frobenius_dev(const Pose& p);

/// Pose with the quaternion renormalized (w sign kept as-is; q and -q map to
/// the same rotation).
Pose normalized(const Pose& p);

Pose rot_z(double angle_rad);
Pose from_axis_angle(const Vec3& axis, double angle_rad, const Vec3& t = Vec3::Zero());

/// d(R(u))/du_k for a unit quaternion u = (w,x,y,z), k = 0..3.
std::array<Mat3, 4> rotation_matrix_derivatives(const Quat& unit_q);

/// Jacobian of q -> q/|q| evaluated at q (4x4). Rows/cols ordered (w,x,y,z).
Eigen::Matrix4d normalization_jacobian(const Quat& q);

// --- KITTI pose text format -------------------------------------------------
// One pose per line: 12 whitespace-separated decimals, row-major upper 3x4 of
// the homogeneous matrix. Values round-trip to 9 significant digits.

Pose parse_kitti_pose_row(const std::string& line, int line_number = -1);
std::string format_kitti_pose_row(const Pose& p);

std::vector<Pose> read_kitti_poses(const std::filesystem::path& file);
void write_kitti_poses(const std::filesystem::path& file, const std::vector<Pose>& poses);

}  // namespace lodom
