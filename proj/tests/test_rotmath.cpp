#include "rotavg/rotmath.hpp"

#include "support.hpp"

#include <doctest.h>

#include <vector>

using namespace rotavg;
using namespace rotavg::test;

TEST_CASE("hat and vee are inverse and hat encodes the cross product") {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 200; ++t) {
    const Vec3 a = random_tangent(rng, 0.0, 5.0);
    const Vec3 b = random_tangent(rng, 0.0, 5.0);
    CHECK((vee(hat(a)) - a).norm() < 1e-15);
    CHECK((hat(a) * b - a.cross(b)).norm() < 1e-13);
    CHECK((hat(a) + hat(a).transpose()).norm() == 0.0);
  }
}

TEST_CASE("quaternion product is the rotation-matrix product") {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 1000; ++t) {
    const UnitQuaternion a = sample_uniform_rotation(rng);
    const UnitQuaternion b = sample_uniform_rotation(rng);
    CHECK(rotation_error(quat_to_matrix(quat_mul(a, b)), quat_to_matrix(a) * quat_to_matrix(b)) < 1e-14);
    CHECK(rotation_error(quat_to_matrix(quat_conjugate(a)), quat_to_matrix(a).transpose()) < 1e-14);
    CHECK(rotation_error(quat_to_matrix(a), quat_to_matrix(-a)) == 0.0);
  }
}

TEST_CASE("quaternion product is associative") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 500; ++t) {
    const auto a = sample_uniform_rotation(rng);
    const auto b = sample_uniform_rotation(rng);
    const auto c = sample_uniform_rotation(rng);
    CHECK((quat_mul(quat_mul(a, b), c).coeffs() - quat_mul(a, quat_mul(b, c)).coeffs()).norm() < 1e-15 * 8);
  }
}

TEST_CASE("matrix_to_quat inverts quat_to_matrix with a canonical sign") {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 2000; ++t) {
    const UnitQuaternion q = sample_uniform_rotation(rng);
    const UnitQuaternion back = matrix_to_quat(quat_to_matrix(q));
    CHECK(back.rho >= 0.0);
    CHECK(std::abs(back.norm() - 1.0) < 1e-15 * 4);
    CHECK(quat_rotation_error(back, q) < 1e-14);
  }
  // Half-turns exercise every branch of the trace-based extraction.
  for (const Vec3 axis : {Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1), Vec3(1, 1, 1).normalized()}) {
    const RotationMatrix r = exp_so3(kPi * axis);
    CHECK(rotation_error(quat_to_matrix(matrix_to_quat(r)), r) < 1e-14);
  }
}

TEST_CASE("log_so3 inverts exp_so3 for angles below pi") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 5000; ++t) {
    const Vec3 v = random_tangent(rng, 0.0, kPi - 1e-6);
    const Vec3 back = log_so3(exp_so3(v));
    CHECK((back - v).norm() < 1e-9);
  }
  for (const double angle : {0.0, 1e-14, 1e-10, 1e-8, 1e-7, 1e-4}) {
    const Vec3 v = angle * Vec3(0.6, -0.8, 0.0);
    CHECK((log_so3(exp_so3(v)) - v).norm() <= 1e-15 + 1e-12 * angle);
  }
}

TEST_CASE("log_so3 near and at a half turn") {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 500; ++t) {
    const Vec3 axis = random_unit_vector(rng);
    for (const double eps : {0.0, 1e-12, 1e-9, 1e-6}) {
      const RotationMatrix r = exp_so3((kPi - eps) * axis);
      const Vec3 w = log_so3(r);
      CHECK(w.norm() <= kPi + 1e-12);
      CHECK(std::abs(w.norm() - (kPi - eps)) < 1e-8);
      // Either sign of the axis is a valid logarithm at pi exactly.
      CHECK(rotation_error(exp_so3(w), r) < 1e-9);
    }
  }
}

TEST_CASE("exp_so3 matches a central finite-difference of its series at small angles") {
  // d/dt exp(t v) at t = 0 is hat(v).
  std::mt19937_64 rng(7);
  for (int t = 0; t < 100; ++t) {
    const Vec3 v = random_tangent(rng, 0.1, 3.0);
    const double h = 1e-6;
    const Mat3 fd = (exp_so3(h * v) - exp_so3(-h * v)) / (2 * h);
    CHECK((fd - hat(v)).norm() < 1e-8);
  }
}

TEST_CASE("exp_quat agrees with exp_so3") {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 1000; ++t) {
    const Vec3 v = random_tangent(rng, 0.0, 2 * kPi);
    CHECK(rotation_error(quat_to_matrix(exp_quat(v)), exp_so3(v)) < 1e-13);
  }
  CHECK(quat_rotation_error(exp_quat(Vec3::Zero()), UnitQuaternion::identity()) == 0.0);
}

TEST_CASE("geodesic distance is a metric and equals the rotation angle") {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 1000; ++t) {
    const RotationMatrix a = random_rotation(rng);
    const RotationMatrix b = random_rotation(rng);
    const RotationMatrix c = random_rotation(rng);
    const Vec3 v = random_tangent(rng, 0.0, kPi - 1e-6);
    CHECK(std::abs(geodesic_distance(a, a * exp_so3(v)) - v.norm()) < 1e-9);
    CHECK(std::abs(geodesic_distance(a, b) - geodesic_distance(b, a)) < 1e-12);
    CHECK(geodesic_distance(a, c) <= geodesic_distance(a, b) + geodesic_distance(b, c) + 1e-12);
    CHECK(geodesic_distance(a, a) < 1e-7);
    const UnitQuaternion qa = matrix_to_quat(a);
    const UnitQuaternion qb = matrix_to_quat(b);
    CHECK(std::abs(quat_angle(quat_mul(quat_conjugate(qa), qb)) - geodesic_distance(a, b)) < 1e-9);
  }
}

TEST_CASE("quat_angle is accurate near zero and sign invariant") {
  for (const double angle : {1e-15, 1e-12, 1e-9, 1e-5, 1.0, 3.0}) {
    const UnitQuaternion q = exp_quat(angle * Vec3(0, 0, 1));
    CHECK(std::abs(quat_angle(q) - angle) <= 1e-15 * 4 + 1e-15 * angle * 4);
    CHECK(quat_angle(-q) == quat_angle(q));
  }
}

TEST_CASE("Haar sampling matches the angle density (1 - cos t) / pi") {
  // Oracle: E[angle] = integral of t (1 - cos t) / pi over [0, pi], by quadrature.
  const int m = 200000;
  double oracle = 0.0;
  for (int k = 0; k < m; ++k) {
    const double t = (k + 0.5) * kPi / m;
    oracle += t * (1 - std::cos(t)) / kPi * (kPi / m);
  }
  CHECK(rad_to_deg(oracle) == doctest::Approx(126.4756).epsilon(1e-5));

  std::mt19937_64 rng(10);
  const int samples = 200000;
  double mean_angle = 0.0;
  Mat3 mean_matrix = Mat3::Zero();
  int below_half_pi = 0;
  for (int s = 0; s < samples; ++s) {
    const UnitQuaternion q = sample_uniform_rotation(rng);
    CHECK_MESSAGE(std::abs(q.norm() - 1.0) < 1e-14, "non-unit sample");
    const double a = quat_angle(q);
    mean_angle += a / samples;
    below_half_pi += a < kPi / 2 ? 1 : 0;
    mean_matrix += quat_to_matrix(q) / samples;
  }
  // Sample std of the angle is about 0.6 rad; 5 sigma is about 0.007 rad.
  CHECK(std::abs(mean_angle - oracle) < 0.007);
  // P(angle < pi/2) = (pi/2 - 1) / pi.
  CHECK(std::abs(below_half_pi / double(samples) - (kPi / 2 - 1) / kPi) < 0.005);
  // The Haar mean of R is the zero matrix.
  CHECK(mean_matrix.cwiseAbs().maxCoeff() < 0.01);
}

TEST_CASE("MRP projection round-trips and antipodes have reciprocal norms") {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 10000; ++t) {
    UnitQuaternion q = sample_uniform_rotation(rng);
    if (q.rho < 0) q = -q;
    const MrpVector psi = mrp_project(q);
    CHECK(psi.norm() <= 1.0 + 1e-15);
    CHECK((mrp_unproject(psi).coeffs() - q.coeffs()).norm() < 1e-12);
    CHECK(std::abs(psi.norm() * mrp_project(-q).norm() - 1.0) < 1e-9);
  }
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  for (int t = 0; t < 1000; ++t) {
    const MrpVector psi(u(rng), u(rng), u(rng));
    const UnitQuaternion q = mrp_unproject(psi);
    CHECK(std::abs(q.norm() - 1.0) < 1e-14);
    CHECK((mrp_project(q) - psi).norm() < 1e-10 * (1 + psi.squaredNorm()));
  }
}

TEST_CASE("MRP projection rejects the south pole") {
  CHECK_THROWS_AS(mrp_project(UnitQuaternion(-1, 0, 0, 0)), SouthPoleSingularity);
  CHECK_THROWS_AS(mrp_project(UnitQuaternion(-1 + 1e-12, 0, 0, 0)), SouthPoleSingularity);
  CHECK_NOTHROW(mrp_project(UnitQuaternion(1, 0, 0, 0)));
  CHECK(mrp_project(UnitQuaternion::identity()).norm() == 0.0);
  // Rotation by pi: rho = 0 maps onto the unit sphere.
  CHECK(mrp_project(UnitQuaternion(0, 1, 0, 0)).norm() == doctest::Approx(1.0));
}

TEST_CASE("project_to_so3 returns the nearest rotation") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> noise(0.0, 0.05);
  for (int t = 0; t < 200; ++t) {
    const RotationMatrix r = random_rotation(rng);
    CHECK(rotation_error(project_to_so3(r), r) < 1e-12);

    Mat3 m = r;
    for (int k = 0; k < 9; ++k) m(k / 3, k % 3) += noise(rng);
    const RotationMatrix p = project_to_so3(m);
    CHECK((p.transpose() * p - Mat3::Identity()).norm() < 1e-12);
    CHECK(p.determinant() == doctest::Approx(1.0).epsilon(1e-12));
    // Random-search oracle: no nearby rotation is closer in Frobenius norm.
    const double best = (m - p).norm();
    for (int s = 0; s < 50; ++s) {
      const RotationMatrix candidate = p * exp_so3(random_tangent(rng, 1e-4, 0.2));
      CHECK((m - candidate).norm() >= best - 1e-12);
    }
  }
  // A reflection is mapped to a proper rotation.
  Mat3 reflect = Mat3::Identity();
  reflect(2, 2) = -1;
  CHECK(project_to_so3(reflect).determinant() == doctest::Approx(1.0));
}

TEST_CASE("degree conversions") {
  CHECK(rad_to_deg(kPi) == doctest::Approx(180.0));
  CHECK(deg_to_rad(90.0) == doctest::Approx(kPi / 2));
}
