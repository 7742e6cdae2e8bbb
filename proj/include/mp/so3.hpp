#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "mp/errors.hpp"

namespace mp {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Unit quaternion, scalar-first, Hamilton product, body-to-world orientation.
struct UnitQuaternion {
  double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

  double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }
  double dot(const UnitQuaternion& o) const { return w * o.w + x * o.x + y * o.y + z * o.z; }
  UnitQuaternion conjugate() const { return {w, -x, -y, -z}; }
  UnitQuaternion negated() const { return {-w, -x, -y, -z}; }

  UnitQuaternion normalized() const {
    double n = norm();
    return {w / n, x / n, y / n, z / n};
  }
};

// Hamilton product a * b.
inline UnitQuaternion quat_mul(const UnitQuaternion& a, const UnitQuaternion& b) {
  return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
          a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
          a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

struct GyroSample {
  double t = 0.0;  // seconds
  Vec3 omega = Vec3::Zero();  // rad/s, body frame
};

struct PoseSample {
  double t = 0.0;  // seconds
  Vec3 p = Vec3::Zero();  // meters
  UnitQuaternion q;
};

using GyroLog = std::vector<GyroSample>;
using PoseLog = std::vector<PoseSample>;

// Cross-product matrix: skew(v) * u == v x u.
inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

// Rodrigues closed form of exp([v]x * dt). Body-rate convention: composing
// R * expm_so3(omega, dt) advances a body-to-world rotation by dt. The
// transposed (negative-rate) variant has the same trace, so every distance
// built on top is convention-independent.
inline Mat3 expm_so3(const Vec3& v, double dt) {
  Vec3 rv = v * dt;
  double theta2 = rv.squaredNorm();
  double theta = std::sqrt(theta2);
  double a, b;  // sin(t)/t and (1-cos(t))/t^2
  if (theta < 1e-8) {
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  Mat3 k = skew(rv);
  return Mat3::Identity() + a * k + b * (k * k);
}

// Chordal rotation distance sqrt(tr(I - Ra^T Rb)). The trace argument is
// clamped to [0, 4] to absorb round-off.
inline double rot_distance(const Mat3& ra, const Mat3& rb) {
  double arg = 3.0 - (ra.transpose() * rb).trace();
  arg = std::clamp(arg, 0.0, 4.0);
  return std::sqrt(arg);
}

inline Mat3 quat_to_rot(const UnitQuaternion& q) {
  double w = q.w, x = q.x, y = q.y, z = q.z;
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w),
       2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
       2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y);
  return r;
}

// Shepperd's method. Rejects input that is not a rotation matrix.
inline UnitQuaternion rot_to_quat(const Mat3& r) {
  double ortho = (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (!(ortho <= 1e-6) || !(r.determinant() > 0.0)) {
    throw validation_error("rot_to_quat: input is not orthonormal with det +1 (|R^T R - I|_max = " +
                           std::to_string(ortho) + ")");
  }
  double tr = r.trace();
  UnitQuaternion q;
  if (tr > 0.0) {
    double s = std::sqrt(tr + 1.0) * 2.0;
    q = {0.25 * s, (r(2, 1) - r(1, 2)) / s, (r(0, 2) - r(2, 0)) / s, (r(1, 0) - r(0, 1)) / s};
  } else if (r(0, 0) > r(1, 1) && r(0, 0) > r(2, 2)) {
    double s = std::sqrt(1.0 + r(0, 0) - r(1, 1) - r(2, 2)) * 2.0;
    q = {(r(2, 1) - r(1, 2)) / s, 0.25 * s, (r(0, 1) + r(1, 0)) / s, (r(0, 2) + r(2, 0)) / s};
  } else if (r(1, 1) > r(2, 2)) {
    double s = std::sqrt(1.0 + r(1, 1) - r(0, 0) - r(2, 2)) * 2.0;
    q = {(r(0, 2) - r(2, 0)) / s, (r(0, 1) + r(1, 0)) / s, 0.25 * s, (r(1, 2) + r(2, 1)) / s};
  } else {
    double s = std::sqrt(1.0 + r(2, 2) - r(0, 0) - r(1, 1)) * 2.0;
    q = {(r(1, 0) - r(0, 1)) / s, (r(0, 2) + r(2, 0)) / s, (r(1, 2) + r(2, 1)) / s, 0.25 * s};
  }
  return q.normalized();
}

// Quaternion of the rotation exp([rv]x), i.e. angle |rv| about rv.
inline UnitQuaternion quat_from_rotvec(const Vec3& rv) {
  double theta2 = rv.squaredNorm();
  double theta = std::sqrt(theta2);
  double half = 0.5 * theta;
  double s;  // sin(theta/2) / theta
  if (theta < 1e-8) {
    s = 0.5 - theta2 / 48.0;
  } else {
    s = std::sin(half) / theta;
  }
  return {std::cos(half), s * rv.x(), s * rv.y(), s * rv.z()};
}

// Body angular velocity from a unit quaternion and its time derivative:
// omega = Im[2 q^* qdot].
inline Vec3 quat_deriv_to_omega(const UnitQuaternion& q, const Eigen::Vector4d& qdot) {
  UnitQuaternion d{qdot(0), qdot(1), qdot(2), qdot(3)};
  UnitQuaternion p = quat_mul(q.conjugate(), d);
  return Vec3(2.0 * p.x, 2.0 * p.y, 2.0 * p.z);
}

// Angular-velocity recovery from an orientation track by finite differences:
// central stencil at interior samples, one-sided at the two ends. Quaternion
// sign continuity is enforced first, so streams differing by per-sample sign
// flips produce identical output.
inline GyroLog quats_to_gyro(const PoseLog& poses) {
  const std::size_t n = poses.size();
  if (n < 2) throw validation_error("quats_to_gyro: need at least 2 pose samples, got " + std::to_string(n));

  std::vector<UnitQuaternion> q(n);
  q[0] = poses[0].q.normalized();
  for (std::size_t k = 1; k < n; ++k) {
    if (!(poses[k].t > poses[k - 1].t)) {
      throw validation_error("quats_to_gyro: timestamps not strictly increasing at sample " +
                             std::to_string(k) + " (t = " + std::to_string(poses[k].t) + ")");
    }
    UnitQuaternion qi = poses[k].q.normalized();
    q[k] = (q[k - 1].dot(qi) < 0.0) ? qi.negated() : qi;
  }

  auto diff = [&](std::size_t a, std::size_t b) {
    double dt = poses[b].t - poses[a].t;
    return Eigen::Vector4d((q[b].w - q[a].w) / dt, (q[b].x - q[a].x) / dt,
                           (q[b].y - q[a].y) / dt, (q[b].z - q[a].z) / dt);
  };

  GyroLog out(n);
  for (std::size_t k = 0; k < n; ++k) {
    Eigen::Vector4d qdot;
    if (k == 0) {
      qdot = diff(0, 1);
    } else if (k == n - 1) {
      qdot = diff(n - 2, n - 1);
    } else {
      qdot = diff(k - 1, k + 1);
    }
    out[k] = {poses[k].t, quat_deriv_to_omega(q[k], qdot)};
  }
  return out;
}

}  // namespace mp
