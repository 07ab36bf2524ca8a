#include "rotavg/rotmath.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace rotavg {

UnitQuaternion UnitQuaternion::from_coeffs(const Vec4& wxyz) {
  const Vec4 n = wxyz.normalized();
  return {n(0), n(1), n(2), n(3)};
}

Mat3 hat(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

Vec3 vee(const Mat3& m) { return {m(2, 1), m(0, 2), m(1, 0)}; }

UnitQuaternion quat_mul(const UnitQuaternion& a, const UnitQuaternion& b) {
  const double w = a.rho * b.rho - a.nu.dot(b.nu);
  const Vec3 v = a.rho * b.nu + b.rho * a.nu + a.nu.cross(b.nu);
  const double inv = 1.0 / std::sqrt(w * w + v.squaredNorm());
  return {w * inv, Vec3(v * inv)};
}

UnitQuaternion quat_conjugate(const UnitQuaternion& q) { return {q.rho, Vec3(-q.nu)}; }

RotationMatrix quat_to_matrix(const UnitQuaternion& q) {
  const double w = q.rho, x = q.nu.x(), y = q.nu.y(), z = q.nu.z();
  const double s = 2.0 / (w * w + x * x + y * y + z * z);
  const double xx = s * x * x, yy = s * y * y, zz = s * z * z;
  const double xy = s * x * y, xz = s * x * z, yz = s * y * z;
  const double wx = s * w * x, wy = s * w * y, wz = s * w * z;
  Mat3 r;
  r << 1.0 - (yy + zz), xy - wz, xz + wy,
       xy + wz, 1.0 - (xx + zz), yz - wx,
       xz - wy, yz + wx, 1.0 - (xx + yy);
  return r;
}

UnitQuaternion matrix_to_quat(const RotationMatrix& r) {
  // Shepperd: branch on the largest of (trace, diagonal) to keep the
  // divisor away from zero.
  const double tr = r.trace();
  Vec4 q;
  if (tr >= r(0, 0) && tr >= r(1, 1) && tr >= r(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + tr);
    q << 0.25 * s, (r(2, 1) - r(1, 2)) / s, (r(0, 2) - r(2, 0)) / s, (r(1, 0) - r(0, 1)) / s;
  } else if (r(0, 0) >= r(1, 1) && r(0, 0) >= r(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + r(0, 0) - r(1, 1) - r(2, 2));
    q << (r(2, 1) - r(1, 2)) / s, 0.25 * s, (r(0, 1) + r(1, 0)) / s, (r(0, 2) + r(2, 0)) / s;
  } else if (r(1, 1) >= r(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + r(1, 1) - r(0, 0) - r(2, 2));
    q << (r(0, 2) - r(2, 0)) / s, (r(0, 1) + r(1, 0)) / s, 0.25 * s, (r(1, 2) + r(2, 1)) / s;
  } else {
    const double s = 2.0 * std::sqrt(1.0 + r(2, 2) - r(0, 0) - r(1, 1));
    q << (r(1, 0) - r(0, 1)) / s, (r(0, 2) + r(2, 0)) / s, (r(1, 2) + r(2, 1)) / s, 0.25 * s;
  }
  if (q(0) < 0.0) q = -q;
  return UnitQuaternion::from_coeffs(q);
}

RotationMatrix exp_so3(const TangentVector& v) {
  const double theta = v.norm();
  const Mat3 w = hat(v);
  if (theta < kSmallAngle) {
    return Mat3::Identity() + w + 0.5 * w * w;
  }
  const Mat3 k = w / theta;
  return Mat3::Identity() + std::sin(theta) * k + (1.0 - std::cos(theta)) * k * k;
}

TangentVector log_so3(const RotationMatrix& r) {
  const double c = std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0);
  const Vec3 w = 0.5 * vee(r - r.transpose());  // sin(theta) * axis
  const double s = w.norm();
  const double theta = std::atan2(s, c);
  if (theta < kSmallAngle) {
    return w;
  }
  if (c >= 0.0) {
    return (theta / s) * w;
  }
  // Obtuse angles: (R + R^T)/2 - cos(theta) I = (1 - cos(theta)) a a^T.
  const Mat3 sym = 0.5 * (r + r.transpose()) - c * Mat3::Identity();
  int k = 0;
  sym.diagonal().maxCoeff(&k);
  Vec3 axis = sym.col(k);
  axis.normalize();
  if (axis.dot(w) < 0.0) axis = -axis;
  return theta * axis;
}

UnitQuaternion exp_quat(const TangentVector& v) {
  const double theta = v.norm();
  if (theta < kSmallAngle) {
    return UnitQuaternion::from_coeffs(Vec4(1.0, 0.5 * v.x(), 0.5 * v.y(), 0.5 * v.z()));
  }
  const double half = 0.5 * theta;
  return {std::cos(half), Vec3(std::sin(half) / theta * v)};
}

double geodesic_distance(const RotationMatrix& a, const RotationMatrix& b) {
  return log_so3(a.transpose() * b).norm();
}

double quat_angle(const UnitQuaternion& q) {
  return 2.0 * std::atan2(q.nu.norm(), std::abs(q.rho));
}

MrpVector mrp_project(const UnitQuaternion& q) {
  if (q.rho <= -1.0 + kSouthPoleTolerance) {
    throw SouthPoleSingularity();
  }
  return q.nu / (1.0 + q.rho);
}

UnitQuaternion mrp_unproject(const MrpVector& psi) {
  const double n2 = psi.squaredNorm();
  const double denom = 1.0 + n2;
  return {(1.0 - n2) / denom, Vec3(2.0 * psi / denom)};
}

UnitQuaternion sample_uniform_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec4 g;
  do {
    g << normal(rng), normal(rng), normal(rng), normal(rng);
  } while (g.norm() < 1e-12);
  return UnitQuaternion::from_coeffs(g);
}

RotationMatrix project_to_so3(const Mat3& m) {
  const Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3& u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  Mat3 d = Mat3::Identity();
  d(2, 2) = (u * v.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  return u * d * v.transpose();
}

}  // namespace rotavg
