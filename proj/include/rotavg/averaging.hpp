// Stochastic iterative rotation averaging: SO(3) tangent-space averaging,
// direct quaternion averaging, and Iterative Modified Rodrigues Projective
// Averaging (MRP), all driven by one batched loop.
#pragma once

#include "rotavg/envgraph.hpp"
#include "rotavg/metrics.hpp"
#include "rotavg/rotmath.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <string_view>
#include <variant>
#include <vector>

namespace rotavg {

enum class Algorithm { so3, quaternion, mrp };

std::string_view to_string(Algorithm algo);
/// Accepts "so3", "quat", "quaternion" and "mrp".
std::optional<Algorithm> parse_algorithm(std::string_view name);

enum class InitMode { identity, haar_random };

/// How the per-pair updates of one batch are scaled: sum applies gamma to
/// every pair, mean applies gamma / batch_size (a mean-reduced batch loss).
enum class BatchReduction { sum, mean };

struct OptimizerConfig {
  Algorithm algorithm = Algorithm::mrp;
  double gamma = 0.5;           // learning rate
  double eta = 0.1;             // max MRP gradient norm
  std::size_t batch_size = 8;
  std::size_t max_iters = 300000;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 1000;  // 0: only the initial and final checkpoints
  InitMode init = InitMode::haar_random;
  BatchReduction reduction = BatchReduction::sum;

  /// gamma, or gamma / batch_size under BatchReduction::mean.
  double step_size() const;

  /// Throws std::invalid_argument unless gamma > 0, eta > 0 and batch_size >= 1.
  void validate() const;
};

/// Per-node optimizer state in the parameterization of one algorithm:
/// rotation matrices (so3), unit quaternions (quaternion) or MRP vectors (mrp).
class EstimateSet {
 public:
  using Storage = std::variant<std::vector<RotationMatrix>, std::vector<UnitQuaternion>, std::vector<MrpVector>>;

  EstimateSet() = default;
  explicit EstimateSet(Storage values) : values_(std::move(values)) {}

  /// Converts through the canonical (rho >= 0) quaternion, so MRP values
  /// start inside the unit ball.
  static EstimateSet from_rotations(Algorithm algo, const std::vector<RotationMatrix>& rotations);

  Algorithm algorithm() const;
  std::size_t size() const;

  RotationMatrix rotation(std::size_t i) const;
  UnitQuaternion quaternion(std::size_t i) const;
  std::vector<RotationMatrix> rotations() const;

  std::vector<RotationMatrix>& so3() { return std::get<0>(values_); }
  std::vector<UnitQuaternion>& quaternions() { return std::get<1>(values_); }
  std::vector<MrpVector>& mrp() { return std::get<2>(values_); }
  const std::vector<RotationMatrix>& so3() const { return std::get<0>(values_); }
  const std::vector<UnitQuaternion>& quaternions() const { return std::get<1>(values_); }
  const std::vector<MrpVector>& mrp() const { return std::get<2>(values_); }

 private:
  Storage values_{std::vector<RotationMatrix>{}};
};

/// 3-vector for so3/mrp, 4-vector for quaternion; never heap-allocates.
using UpdateVector = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, 4, 1>;

struct PairUpdate {
  NodeId i = 0;
  NodeId j = 0;
  double loss = 0.0;
  UpdateVector update;  // the change applied to node i's parameters
};

struct StepReport {
  std::vector<PairUpdate> pairs;
};

/// q~_i = q_i^j ⊗ q^_j
UnitQuaternion target_quaternion(const UnitQuaternion& q_ij, const UnitQuaternion& qhat_j);

struct MrpPairTerm {
  double loss = 0.0;        // min(loss_plus, loss_minus)
  MrpVector grad;           // psi_i - phi(±q~_i), constant factor dropped
  int antipode = +1;        // sign of q~_i whose projection was selected
  double loss_plus = 0.0;   // ||psi_i - phi(q~_i)||^2, +inf at the south pole
  double loss_minus = 0.0;  // ||psi_i - phi(-q~_i)||^2, +inf at the south pole
};

/// MRP pair loss and gradient with psi_j held constant.
MrpPairTerm mrp_loss_and_grad(const MrpVector& psi_i, const MrpVector& psi_j, const UnitQuaternion& q_ij);

struct So3PairTerm {
  double loss = 0.0;      // ||r_delta||^2
  TangentVector r_delta;  // log(R_i^T R_i^j R_j)
};

So3PairTerm so3_loss_and_grad(const RotationMatrix& r_i, const RotationMatrix& r_j, const RotationMatrix& r_ij);

struct QuaternionPairTerm {
  double loss = 0.0;  // 1 - <q_i, q~_i>^2
  Vec4 grad;          // -2 <q_i, q~_i> q~_i in (w, x, y, z)
};

QuaternionPairTerm quaternion_loss_and_grad(const UnitQuaternion& q_i, const UnitQuaternion& q_j,
                                            const UnitQuaternion& q_ij);

/// Caps the norm of v at max_norm.
MrpVector clamp_norm(const MrpVector& v, double max_norm);

/// Batch of node ids: distinct when batch_size <= n, otherwise drawn with
/// replacement.
std::vector<NodeId> sample_batch(std::size_t n, std::size_t batch_size, std::mt19937_64& rng);

// One synchronous batch update: every gradient in the batch is computed from
// the pre-step state, then all updates are applied.
StepReport mrp_step(EstimateSet& estimates, const RotationEnvironment& env, const OptimizerConfig& cfg,
                    std::mt19937_64& rng);
StepReport so3_step(EstimateSet& estimates, const RotationEnvironment& env, const OptimizerConfig& cfg,
                    std::mt19937_64& rng);
StepReport quaternion_step(EstimateSet& estimates, const RotationEnvironment& env, const OptimizerConfig& cfg,
                           std::mt19937_64& rng);
/// Dispatches on estimates.algorithm().
StepReport step(EstimateSet& estimates, const RotationEnvironment& env, const OptimizerConfig& cfg,
                std::mt19937_64& rng);

/// Mean of the unscaled, unclamped per-pair gradient of node i over its
/// neighborhood: r_delta (so3), psi_delta (mrp) or the R^4 gradient
/// (quaternion).
UpdateVector expected_update(const EstimateSet& estimates, const RotationEnvironment& env, NodeId i);

/// Initial estimates for cfg: identity, or Haar-random rotations drawn from rng.
EstimateSet initial_estimates(std::size_t n, const OptimizerConfig& cfg, std::mt19937_64& rng);

/// The random stream behind initialization and batch sampling for a seed.
std::mt19937_64 make_optimizer_rng(std::uint64_t seed);

struct RunResult {
  EstimateSet estimates;
  std::vector<TraceRecord> trace;
};

/// Runs cfg.max_iters batch steps from cfg.init. Checkpoints are taken at
/// step 0, every cfg.checkpoint_every steps and at the final step.
/// Deterministic given (env, cfg).
RunResult run_averaging(const RotationEnvironment& env, const OptimizerConfig& cfg);
/// Same loop from caller-supplied initial estimates.
RunResult run_averaging(const RotationEnvironment& env, const OptimizerConfig& cfg, EstimateSet initial);

}  // namespace rotavg
