// Evaluation quantities for rotation averaging runs. Every error is reported
// in degrees.
#pragma once

#include "rotavg/envgraph.hpp"
#include "rotavg/rotmath.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace rotavg {

struct ErrorStats {
  double mean_deg = 0.0;
  double median_deg = 0.0;
};

/// Metric snapshot at one checkpoint. The pairwise and absolute families need
/// ground truth and are empty without it.
struct TraceRecord {
  std::size_t step = 0;
  std::optional<double> ape_mean_deg;
  std::optional<double> ape_median_deg;
  double rel_mean_deg = 0.0;
  double rel_median_deg = 0.0;
  std::optional<double> abs_mean_deg;
  std::optional<double> abs_median_deg;
};

struct ConvergenceSummary {
  std::optional<std::size_t> steps_to_5deg;
  double nauc = 0.0;
  double final_ape_deg = 0.0;
};

inline constexpr double kConvergenceThresholdDeg = 5.0;

class DegenerateAlignment : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Neumaier-compensated sum.
double compensated_sum(std::span<const double> values);
/// Median; an even count averages the two middle values. Empty input gives 0.
double median(std::vector<double> values);

/// Over all unordered pairs i < j: angle between R_hat_i R_hat_j^T and
/// R_i R_j^T. Invariant to the gauge R_hat_i -> R_hat_i S, the freedom left
/// by R_i = R_i^j R_j.
ErrorStats avg_pairwise_error(std::span<const RotationMatrix> estimates,
                              std::span<const RotationMatrix> ground_truth);

/// Over all stored directed edges: d(R_hat_i, R_i^j R_hat_j).
ErrorStats relative_edge_error(std::span<const RotationMatrix> estimates, const RotationEnvironment& env);

/// Rotation S minimizing sum_i ||R_i - R_hat_i S||_F^2. Throws
/// DegenerateAlignment when S is not unique.
RotationMatrix align_gauge(std::span<const RotationMatrix> estimates,
                           std::span<const RotationMatrix> ground_truth);

/// Per-node d(R_hat_i S, R_i) after align_gauge; S = I if alignment is degenerate.
ErrorStats absolute_error(std::span<const RotationMatrix> estimates,
                          std::span<const RotationMatrix> ground_truth);

/// Trapezoidal area under ape_mean_deg with the checkpoint steps normalized to [0, 1].
/// Needs at least two checkpoints carrying ape values.
double nauc(std::span<const TraceRecord> trace);

/// First checkpoint step whose ape_mean_deg is below the threshold.
std::optional<std::size_t> steps_to_threshold(std::span<const TraceRecord> trace,
                                              double threshold_deg = kConvergenceThresholdDeg);

ConvergenceSummary summarize(std::span<const TraceRecord> trace);

TraceRecord evaluate_checkpoint(std::size_t step, std::span<const RotationMatrix> estimates,
                                const RotationEnvironment& env);

}  // namespace rotavg
