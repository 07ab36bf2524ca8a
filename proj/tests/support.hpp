#pragma once

#include "rotavg/rotmath.hpp"

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

namespace rotavg::test {

inline constexpr double kPi = 3.14159265358979323846;

inline Vec3 random_unit_vector(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Vec3 v;
  do {
    v = Vec3(g(rng), g(rng), g(rng));
  } while (v.norm() < 1e-6);
  return v.normalized();
}

/// Axis-angle vector with angle uniform in [lo, hi).
inline Vec3 random_tangent(std::mt19937_64& rng, double lo = 0.0, double hi = kPi) {
  std::uniform_real_distribution<double> angle(lo, hi);
  return angle(rng) * random_unit_vector(rng);
}

inline RotationMatrix random_rotation(std::mt19937_64& rng) { return quat_to_matrix(sample_uniform_rotation(rng)); }

inline double rotation_error(const RotationMatrix& a, const RotationMatrix& b) { return (a - b).norm(); }

/// Equal as rotations (q ~ -q).
inline double quat_rotation_error(const UnitQuaternion& a, const UnitQuaternion& b) {
  return std::min((a.coeffs() - b.coeffs()).norm(), (a.coeffs() + b.coeffs()).norm());
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("rotavg_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace rotavg::test
