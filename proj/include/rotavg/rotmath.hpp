// Rotation arithmetic shared by every averaging algorithm: quaternions,
// rotation matrices, the SO(3) exponential/logarithm, and the Modified
// Rodrigues Parameter (MRP) stereographic projection.
//
// Conventions:
//  - Quaternions are Hamilton quaternions [rho, nu] with rho the real part.
//    quat_to_matrix(a ⊗ b) == quat_to_matrix(a) * quat_to_matrix(b).
//  - Tangent vectors are axis * angle (radians).
//  - MRP vectors are psi = nu / (1 + rho).
#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <random>
#include <stdexcept>

namespace rotavg {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;

/// Proper rotation, orthonormal with det +1.
using RotationMatrix = Mat3;
/// Axis-angle rotation vector; its norm is the angle in radians.
using TangentVector = Vec3;
/// Modified Rodrigues Parameters; lives in the open space R^3.
using MrpVector = Vec3;

/// Unit quaternion [rho, nu]. q and -q are the same rotation; no sign is
/// enforced here.
struct UnitQuaternion {
  double rho = 1.0;
  Vec3 nu = Vec3::Zero();

  UnitQuaternion() = default;
  UnitQuaternion(double w, double x, double y, double z) : rho(w), nu(x, y, z) {}
  UnitQuaternion(double w, const Vec3& v) : rho(w), nu(v) {}

  static UnitQuaternion identity() { return {}; }
  /// Builds from an arbitrary nonzero 4-vector (w, x, y, z) by normalizing it.
  static UnitQuaternion from_coeffs(const Vec4& wxyz);

  /// (w, x, y, z)
  Vec4 coeffs() const { return {rho, nu.x(), nu.y(), nu.z()}; }
  double norm() const { return coeffs().norm(); }
  UnitQuaternion operator-() const { return {-rho, Vec3(-nu)}; }
  double dot(const UnitQuaternion& o) const { return rho * o.rho + nu.dot(o.nu); }
};

/// Thrown by mrp_project for quaternions at (or numerically at) rho = -1,
/// where the projection diverges. The caller must use the other antipode.
class SouthPoleSingularity : public std::domain_error {
 public:
  SouthPoleSingularity() : std::domain_error("MRP projection of the south pole (rho = -1)") {}
};

inline constexpr double kSouthPoleTolerance = 1e-9;
inline constexpr double kSmallAngle = 1e-8;

Mat3 hat(const Vec3& v);
Vec3 vee(const Mat3& m);

/// Hamilton product a ⊗ b, renormalized.
UnitQuaternion quat_mul(const UnitQuaternion& a, const UnitQuaternion& b);
UnitQuaternion quat_conjugate(const UnitQuaternion& q);

RotationMatrix quat_to_matrix(const UnitQuaternion& q);
/// Returns the antipode with rho >= 0.
UnitQuaternion matrix_to_quat(const RotationMatrix& r);

/// Rodrigues formula; below kSmallAngle the second-order series is used.
RotationMatrix exp_so3(const TangentVector& v);
/// Principal logarithm, ||v|| in [0, pi]. Near pi the axis comes from the
/// symmetric part of R, so there is no division by sin(theta).
TangentVector log_so3(const RotationMatrix& r);
/// Unit quaternion for the rotation vector v (rho >= 0 whenever ||v|| <= pi).
UnitQuaternion exp_quat(const TangentVector& v);

/// ||log(a^T b)|| in radians.
double geodesic_distance(const RotationMatrix& a, const RotationMatrix& b);
/// Rotation angle of a unit quaternion in [0, pi], invariant to its sign.
double quat_angle(const UnitQuaternion& q);

/// psi = nu / (1 + rho). Throws SouthPoleSingularity when rho <= -1 + 1e-9.
MrpVector mrp_project(const UnitQuaternion& q);
/// rho = (1 - |psi|^2) / (1 + |psi|^2), nu = 2 psi / (1 + |psi|^2).
UnitQuaternion mrp_unproject(const MrpVector& psi);

/// Haar-uniform rotation from a normalized 4D Gaussian draw.
UnitQuaternion sample_uniform_rotation(std::mt19937_64& rng);

/// Nearest rotation in Frobenius norm (special-orthogonal polar factor).
RotationMatrix project_to_so3(const Mat3& m);

inline double rad_to_deg(double rad) { return rad * (180.0 / 3.14159265358979323846); }
inline double deg_to_rad(double deg) { return deg * (3.14159265358979323846 / 180.0); }

}  // namespace rotavg
