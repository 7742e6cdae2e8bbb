#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "mp/so3.hpp"
#include "test_util.hpp"

using namespace mp;
using test_util::expm_taylor;
using test_util::Rng;

namespace {

constexpr double kPi = std::numbers::pi;

PoseLog constant_z_track(double omega_z, double rate_hz, double duration) {
  PoseLog poses;
  UnitQuaternion q;
  std::size_t steps = static_cast<std::size_t>(std::llround(duration * rate_hz));
  for (std::size_t k = 0; k <= steps; ++k) {
    double t = static_cast<double>(k) / rate_hz;
    if (k > 0) q = quat_mul(q, quat_from_rotvec(Vec3(0, 0, omega_z) / rate_hz)).normalized();
    poses.push_back({t, Vec3::Zero(), q});
  }
  return poses;
}

}  // namespace

TEST_CASE("skew matches the cross product layout") {
  REQUIRE(skew(Vec3::Zero()).isZero(0.0));

  Mat3 expected;
  expected << 0, -3, 2, 3, 0, -1, -2, 1, 0;
  REQUIRE((skew(Vec3(1, 2, 3)) - expected).cwiseAbs().maxCoeff() == 0.0);

  Rng rng(11);
  for (int i = 0; i < 50; ++i) {
    Vec3 v(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));
    Vec3 u(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));
    REQUIRE((skew(v) + skew(v).transpose()).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE((skew(v) * u - v.cross(u)).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("expm_so3 closed form") {
  SECTION("zero rate is the identity") {
    REQUIRE((expm_so3(Vec3::Zero(), 3.7) - Mat3::Identity()).cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("quarter turn about z") {
    Mat3 expected;
    expected << 0, -1, 0, 1, 0, 0, 0, 0, 1;
    Mat3 r = expm_so3(Vec3(0, 0, 1), kPi / 2);
    REQUIRE((r - expected).cwiseAbs().maxCoeff() < 1e-15);
    REQUIRE((r - expm_taylor(skew(Vec3(0, 0, kPi / 2)))).cwiseAbs().maxCoeff() < 1e-12);
  }

  SECTION("matches the Taylor oracle for |v| dt <= 1") {
    Rng rng(22);
    for (int i = 0; i < 200; ++i) {
      Vec3 v = rng.unit_vector() * rng.uniform(0.0, 2.0);
      double dt = rng.uniform(0.0, 0.5);
      if (v.norm() * dt > 1.0) continue;
      Mat3 oracle = expm_taylor(skew(v * dt));
      REQUIRE((expm_so3(v, dt) - oracle).cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  SECTION("tiny angles hit the series branch without precision loss") {
    Vec3 v(1e-10, -2e-10, 5e-11);
    Mat3 oracle = expm_taylor(skew(v));
    REQUIRE((expm_so3(v, 1.0) - oracle).cwiseAbs().maxCoeff() < 1e-15);
  }

  SECTION("orthonormal with det 1 up to |v| dt = 10") {
    Rng rng(33);
    for (int i = 0; i < 100; ++i) {
      Vec3 v = rng.unit_vector() * rng.uniform(0.0, 5.0);
      double dt = rng.uniform(0.0, 2.0);
      Mat3 r = expm_so3(v, dt);
      REQUIRE((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-9);
      REQUIRE(std::abs(r.determinant() - 1.0) < 1e-9);
    }
  }

  SECTION("same-axis composition") {
    Rng rng(44);
    for (int i = 0; i < 50; ++i) {
      Vec3 v = rng.unit_vector() * rng.uniform(0.0, 2.0);
      double a = rng.uniform(0.0, 2.0), b = rng.uniform(0.0, 2.0);
      Mat3 lhs = expm_so3(v, a) * expm_so3(v, b);
      REQUIRE((lhs - expm_so3(v, a + b)).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("rot_distance chordal metric") {
  Rng rng(55);
  Mat3 i = Mat3::Identity();
  REQUIRE(rot_distance(i, i) == 0.0);

  Mat3 rz = expm_so3(Vec3(0, 0, 1), kPi / 2);
  REQUIRE(rot_distance(i, rz) == Catch::Approx(std::sqrt(2.0)).margin(1e-12));

  for (int k = 0; k < 50; ++k) {
    Mat3 a = test_util::random_rotation(rng);
    Mat3 b = test_util::random_rotation(rng);
    double dab = rot_distance(a, b);
    REQUIRE(dab == Catch::Approx(rot_distance(b, a)).margin(1e-13));
    REQUIRE(dab >= 0.0);
    REQUIRE(dab <= 2.0);
  }

  SECTION("closed form sqrt(2(1-cos theta)) on axis-angle pairs") {
    for (int k = 0; k < 50; ++k) {
      Mat3 base = test_util::random_rotation(rng);
      double theta = rng.uniform(0.0, kPi);
      Mat3 moved = base * expm_so3(rng.unit_vector(), theta);
      double expected = std::sqrt(2.0 * (1.0 - std::cos(theta)));
      REQUIRE(rot_distance(base, moved) == Catch::Approx(expected).margin(1e-10));
    }
  }
}

TEST_CASE("quaternion / rotation conversions") {
  REQUIRE((quat_to_rot({1, 0, 0, 0}) - Mat3::Identity()).cwiseAbs().maxCoeff() == 0.0);

  double h = std::cos(kPi / 4);
  Mat3 rz = quat_to_rot({h, 0, 0, std::sin(kPi / 4)});
  REQUIRE((rz - expm_so3(Vec3(0, 0, 1), kPi / 2)).cwiseAbs().maxCoeff() < 1e-12);

  SECTION("round trip up to global sign") {
    Rng rng(66);
    for (int k = 0; k < 100; ++k) {
      UnitQuaternion q{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
      q = q.normalized();
      UnitQuaternion back = rot_to_quat(quat_to_rot(q));
      double align = std::abs(q.dot(back));
      REQUIRE(align == Catch::Approx(1.0).margin(1e-9));
    }
  }

  SECTION("rot_to_quat rejects non-orthonormal input") {
    Mat3 bad = Mat3::Identity();
    bad(0, 0) = 1.5;
    REQUIRE_THROWS_AS(rot_to_quat(bad), validation_error);
    Mat3 reflect = Mat3::Identity();
    reflect(2, 2) = -1.0;  // orthonormal but det -1
    REQUIRE_THROWS_AS(rot_to_quat(reflect), validation_error);
  }
}

TEST_CASE("quat_deriv_to_omega") {
  REQUIRE(quat_deriv_to_omega({1, 0, 0, 0}, Eigen::Vector4d::Zero()).isZero(0.0));

  Vec3 w = quat_deriv_to_omega({1, 0, 0, 0}, Eigen::Vector4d(0, 0, 0, 0.25));
  REQUIRE((w - Vec3(0, 0, 0.5)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("quats_to_gyro recovers rates") {
  SECTION("static orientation gives zero rates") {
    PoseLog poses = {{0.0, Vec3::Zero(), {1, 0, 0, 0}}, {0.1, Vec3::Zero(), {1, 0, 0, 0}}};
    GyroLog g = quats_to_gyro(poses);
    REQUIRE(g.size() == 2);
    REQUIRE(g[0].omega.isZero(0.0));
    REQUIRE(g[1].omega.isZero(0.0));
  }

  SECTION("constant rotation about z at 0.5 rad/s, 100 Hz, 2 s") {
    PoseLog poses = constant_z_track(0.5, 100.0, 2.0);
    GyroLog g = quats_to_gyro(poses);
    for (const GyroSample& s : g) {
      REQUIRE((s.omega - Vec3(0, 0, 0.5)).cwiseAbs().maxCoeff() < 1e-4);
    }
  }

  SECTION("per-sample sign flips do not change the output") {
    PoseLog poses = constant_z_track(0.8, 50.0, 1.0);
    PoseLog flipped = poses;
    for (std::size_t k = 0; k < flipped.size(); k += 2) flipped[k].q = flipped[k].q.negated();
    GyroLog a = quats_to_gyro(poses);
    GyroLog b = quats_to_gyro(flipped);
    for (std::size_t k = 0; k < a.size(); ++k) {
      REQUIRE((a[k].omega - b[k].omega).cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  SECTION("reintegration reproduces the final orientation") {
    PoseLog poses = constant_z_track(1.0, 100.0, 2.0);
    GyroLog g = quats_to_gyro(poses);
    Mat3 r = Mat3::Identity();
    for (std::size_t k = 1; k < g.size(); ++k) {
      r = r * expm_so3(g[k].omega, g[k].t - g[k - 1].t);
    }
    Mat3 expected = quat_to_rot(poses.front().q).transpose() * quat_to_rot(poses.back().q);
    double angle_err = rot_distance(r, expected);  // ~theta for small errors
    REQUIRE(angle_err < 1e-3);
  }

  SECTION("errors") {
    REQUIRE_THROWS_AS(quats_to_gyro({}), validation_error);
    REQUIRE_THROWS_AS(quats_to_gyro({{0.0, Vec3::Zero(), {1, 0, 0, 0}}}), validation_error);
    PoseLog dup = {{0.0, Vec3::Zero(), {1, 0, 0, 0}}, {0.0, Vec3::Zero(), {1, 0, 0, 0}}};
    REQUIRE_THROWS_AS(quats_to_gyro(dup), validation_error);
  }
}
