#pragma once

// 6-DoF pose values: translation in meters plus a unit quaternion stored as
// (w, x, y, z) with a canonical non-negative sign.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "copr/error.hpp"

namespace copr {

using Vec3 = Eigen::Vector3d;

class Quaternion {
 public:
  /// Identity rotation.
  constexpr Quaternion() = default;

  /// Normalizes and canonicalizes; throws ZeroQuaternion for ||q|| <= 1e-12.
  Quaternion(double w, double x, double y, double z) {
    const double norm = std::sqrt(w * w + x * x + y * y + z * z);
    if (!(norm > 1e-12)) {
      throw Error(ErrorCode::ZeroQuaternion, "cannot normalize quaternion with norm <= 1e-12");
    }
    // already-unit input is kept as is so that normalization is idempotent
    if (std::abs(norm - 1.0) <= 1e-15) {
      c_ = {w, x, y, z};
    } else {
      c_ = {w / norm, x / norm, y / norm, z / norm};
    }
    // canonical sign: w > 0, or w == 0 and the first nonzero of x,y,z > 0
    double lead = c_[0];
    for (std::size_t i = 1; lead == 0.0 && i < 4; ++i) lead = c_[i];
    if (lead < 0.0) {
      for (double& v : c_) v = -v;
    }
    for (double& v : c_) v += 0.0;  // drop negative zeros
  }

  double w() const { return c_[0]; }
  double x() const { return c_[1]; }
  double y() const { return c_[2]; }
  double z() const { return c_[3]; }
  const std::array<double, 4>& coeffs() const { return c_; }

  Quaternion conjugate() const { return Quaternion(c_[0], -c_[1], -c_[2], -c_[3]); }

  double dot(const Quaternion& o) const {
    return c_[0] * o.c_[0] + c_[1] * o.c_[1] + c_[2] * o.c_[2] + c_[3] * o.c_[3];
  }

  /// Hamilton product this ⊗ o.
  Quaternion operator*(const Quaternion& o) const {
    const auto& a = c_;
    const auto& b = o.c_;
    return Quaternion(a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
                      a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
                      a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
                      a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]);
  }

  Vec3 rotate(const Vec3& v) const {
    const Vec3 u(c_[1], c_[2], c_[3]);
    const Vec3 t = 2.0 * u.cross(v);
    return v + c_[0] * t + u.cross(t);
  }

  static Quaternion from_axis_angle(const Vec3& axis, double angle_rad) {
    const Vec3 n = axis.normalized();
    const double s = std::sin(0.5 * angle_rad);
    return Quaternion(std::cos(0.5 * angle_rad), n.x() * s, n.y() * s, n.z() * s);
  }

  bool operator==(const Quaternion&) const = default;

 private:
  std::array<double, 4> c_{1.0, 0.0, 0.0, 0.0};
};

inline Quaternion normalize_quat(double w, double x, double y, double z) {
  return Quaternion(w, x, y, z);
}

struct Pose {
  Vec3 t = Vec3::Zero();
  Quaternion q;

  bool operator==(const Pose& o) const { return t == o.t && q == o.q; }
};

inline Pose make_pose(const Vec3& t, const Quaternion& q) {
  if (!t.allFinite()) throw Error(ErrorCode::InvalidPose, "non-finite translation");
  return Pose{t, q};
}

/// Relative pose from an anchor to a target. dt is in the world frame.
struct RelativePose {
  Vec3 dt = Vec3::Zero();
  Quaternion dq;

  /// Flat layout (dx, dy, dz, qw, qx, qy, qz).
  std::array<double, 7> flat() const {
    return {dt.x(), dt.y(), dt.z(), dq.w(), dq.x(), dq.y(), dq.z()};
  }
};

inline RelativePose relative_pose(const Pose& anchor, const Pose& target) {
  return RelativePose{target.t - anchor.t, anchor.q.conjugate() * target.q};
}

/// 2·arccos(|<a,b>|) in degrees, the dot clamped to [0, 1].
inline double angular_error_deg(const Quaternion& a, const Quaternion& b) {
  const double d = std::clamp(std::abs(a.dot(b)), 0.0, 1.0);
  return 2.0 * std::acos(d) * 180.0 / std::numbers::pi;
}

inline double translation_error(const Pose& a, const Pose& b) { return (a.t - b.t).norm(); }

/// Shortest-arc spherical interpolation, s in [0, 1].
inline Quaternion slerp(const Quaternion& a, const Quaternion& b, double s) {
  double d = a.dot(b);
  std::array<double, 4> bc = b.coeffs();
  if (d < 0.0) {
    d = -d;
    for (double& v : bc) v = -v;
  }
  const auto& ac = a.coeffs();
  double wa = 1.0 - s;
  double wb = s;
  if (d < 0.9995) {
    const double theta = std::acos(std::clamp(d, -1.0, 1.0));
    const double sin_theta = std::sin(theta);
    wa = std::sin((1.0 - s) * theta) / sin_theta;
    wb = std::sin(s * theta) / sin_theta;
  }
  return Quaternion(wa * ac[0] + wb * bc[0], wa * ac[1] + wb * bc[1], wa * ac[2] + wb * bc[2],
                    wa * ac[3] + wb * bc[3]);
}

}  // namespace copr
