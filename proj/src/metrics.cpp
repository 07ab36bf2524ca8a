#include "rotavg/metrics.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>

namespace rotavg {

double compensated_sum(std::span<const double> values) {
  double sum = 0.0;
  double carry = 0.0;
  for (const double v : values) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      carry += (sum - t) + v;
    } else {
      carry += (v - t) + sum;
    }
    sum = t;
  }
  return sum + carry;
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

namespace {

ErrorStats stats_deg(std::vector<double> angles_rad) {
  for (auto& a : angles_rad) a = rad_to_deg(a);
  ErrorStats s;
  if (angles_rad.empty()) return s;
  s.mean_deg = compensated_sum(angles_rad) / static_cast<double>(angles_rad.size());
  s.median_deg = median(std::move(angles_rad));
  return s;
}

std::vector<UnitQuaternion> to_quaternions(std::span<const RotationMatrix> rotations) {
  std::vector<UnitQuaternion> out;
  out.reserve(rotations.size());
  for (const auto& r : rotations) out.push_back(matrix_to_quat(r));
  return out;
}

void check_sizes(std::span<const RotationMatrix> estimates, std::span<const RotationMatrix> ground_truth) {
  if (estimates.size() != ground_truth.size()) {
    throw std::invalid_argument("estimate and ground-truth counts differ");
  }
}

}  // namespace

ErrorStats avg_pairwise_error(std::span<const RotationMatrix> estimates,
                              std::span<const RotationMatrix> ground_truth) {
  check_sizes(estimates, ground_truth);
  const std::size_t n = estimates.size();
  // d(R^_i R^_j^T, R_i R_j^T) is the angle of A_i A_j^T with A_i = R^_i^T R_i.
  std::vector<UnitQuaternion> a(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = quat_mul(quat_conjugate(matrix_to_quat(estimates[i])), matrix_to_quat(ground_truth[i]));
  }
  std::vector<double> angles;
  angles.reserve(n * (n - (n > 0 ? 1 : 0)) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      angles.push_back(quat_angle(quat_mul(a[i], quat_conjugate(a[j]))));
    }
  }
  return stats_deg(std::move(angles));
}

ErrorStats relative_edge_error(std::span<const RotationMatrix> estimates, const RotationEnvironment& env) {
  if (estimates.size() != env.size()) throw std::invalid_argument("estimate count does not match the environment");
  const auto q = to_quaternions(estimates);
  std::vector<double> angles;
  angles.reserve(env.edges().size());
  for (const Edge& e : env.edges()) {
    angles.push_back(quat_angle(quat_mul(quat_conjugate(q[e.i]), quat_mul(e.rel, q[e.j]))));
  }
  return stats_deg(std::move(angles));
}

RotationMatrix align_gauge(std::span<const RotationMatrix> estimates,
                           std::span<const RotationMatrix> ground_truth) {
  check_sizes(estimates, ground_truth);
  if (estimates.empty()) throw DegenerateAlignment("no rotations to align");
  Mat3 m = Mat3::Zero();
  for (std::size_t i = 0; i < estimates.size(); ++i) m += estimates[i].transpose() * ground_truth[i];

  const Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sigma = svd.singularValues();
  const double sign = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  // The maximizer of tr(S^T M) over SO(3) is unique iff sigma_2 + sign * sigma_3 > 0.
  // Each term has spectral norm 1, so the tolerance scales with the count.
  const double tol = 1e-9 * static_cast<double>(estimates.size());
  if (sigma(1) + sign * sigma(2) <= tol) {
    throw DegenerateAlignment("gauge alignment is ambiguous (rank-deficient accumulator)");
  }
  Mat3 d = Mat3::Identity();
  d(2, 2) = sign;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

ErrorStats absolute_error(std::span<const RotationMatrix> estimates,
                          std::span<const RotationMatrix> ground_truth) {
  check_sizes(estimates, ground_truth);
  RotationMatrix s = RotationMatrix::Identity();
  try {
    s = align_gauge(estimates, ground_truth);
  } catch (const DegenerateAlignment&) {
  }
  const UnitQuaternion qs = matrix_to_quat(s);
  std::vector<double> angles;
  angles.reserve(estimates.size());
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    const UnitQuaternion aligned = quat_mul(matrix_to_quat(estimates[i]), qs);
    angles.push_back(quat_angle(quat_mul(quat_conjugate(aligned), matrix_to_quat(ground_truth[i]))));
  }
  return stats_deg(std::move(angles));
}

double nauc(std::span<const TraceRecord> trace) {
  std::vector<std::pair<double, double>> curve;
  for (const auto& rec : trace) {
    if (rec.ape_mean_deg) curve.emplace_back(static_cast<double>(rec.step), *rec.ape_mean_deg);
  }
  if (curve.size() < 2) throw std::invalid_argument("nAUC needs at least two checkpoints with pairwise errors");
  const double span = curve.back().first - curve.front().first;
  if (!(span > 0.0)) throw std::invalid_argument("nAUC needs checkpoints spanning a positive number of steps");
  // Integrate deviations from the first value so a constant curve gives it back exactly.
  const double base = curve.front().second;
  std::vector<double> pieces;
  pieces.reserve(curve.size() - 1);
  for (std::size_t k = 1; k < curve.size(); ++k) {
    const double dx = (curve[k].first - curve[k - 1].first) / span;
    pieces.push_back(dx * (0.5 * (curve[k].second + curve[k - 1].second) - base));
  }
  return base + compensated_sum(pieces);
}

std::optional<std::size_t> steps_to_threshold(std::span<const TraceRecord> trace, double threshold_deg) {
  for (const auto& rec : trace) {
    if (rec.ape_mean_deg && *rec.ape_mean_deg < threshold_deg) return rec.step;
  }
  return std::nullopt;
}

ConvergenceSummary summarize(std::span<const TraceRecord> trace) {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  ConvergenceSummary out;
  out.steps_to_5deg = steps_to_threshold(trace);
  out.final_ape_deg = (!trace.empty() && trace.back().ape_mean_deg) ? *trace.back().ape_mean_deg : nan;
  std::size_t with_ape = 0;
  for (const auto& rec : trace) with_ape += rec.ape_mean_deg ? 1 : 0;
  if (with_ape >= 2 && trace.back().step > 0) {
    out.nauc = nauc(trace);
  } else if (with_ape == 1) {
    // A single checkpoint is a constant curve.
    out.nauc = out.final_ape_deg;
  } else {
    out.nauc = nan;
  }
  return out;
}

TraceRecord evaluate_checkpoint(std::size_t step, std::span<const RotationMatrix> estimates,
                                const RotationEnvironment& env) {
  TraceRecord rec;
  rec.step = step;
  const ErrorStats rel = relative_edge_error(estimates, env);
  rec.rel_mean_deg = rel.mean_deg;
  rec.rel_median_deg = rel.median_deg;
  if (env.has_ground_truth()) {
    const auto gt = env.ground_truth_matrices();
    const ErrorStats ape = avg_pairwise_error(estimates, gt);
    const ErrorStats abs = absolute_error(estimates, gt);
    rec.ape_mean_deg = ape.mean_deg;
    rec.ape_median_deg = ape.median_deg;
    rec.abs_mean_deg = abs.mean_deg;
    rec.abs_median_deg = abs.median_deg;
  }
  return rec;
}

}  // namespace rotavg
