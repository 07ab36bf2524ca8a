#include "rotavg/averaging.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace rotavg {

std::string_view to_string(Algorithm algo) {
  switch (algo) {
    case Algorithm::so3: return "so3";
    case Algorithm::quaternion: return "quat";
    case Algorithm::mrp: return "mrp";
  }
  return "unknown";
}

std::optional<Algorithm> parse_algorithm(std::string_view name) {
  if (name == "so3") return Algorithm::so3;
  if (name == "quat" || name == "quaternion") return Algorithm::quaternion;
  if (name == "mrp") return Algorithm::mrp;
  return std::nullopt;
}

void OptimizerConfig::validate() const {
  if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be positive");
  if (!(eta > 0.0)) throw std::invalid_argument("eta must be positive");
  if (batch_size < 1) throw std::invalid_argument("batch size must be at least 1");
}

double OptimizerConfig::step_size() const {
  return reduction == BatchReduction::mean ? gamma / static_cast<double>(batch_size) : gamma;
}

// ---------------------------------------------------------------------------
// EstimateSet

EstimateSet EstimateSet::from_rotations(Algorithm algo, const std::vector<RotationMatrix>& rotations) {
  switch (algo) {
    case Algorithm::so3:
      return EstimateSet(rotations);
    case Algorithm::quaternion: {
      std::vector<UnitQuaternion> q;
      q.reserve(rotations.size());
      for (const auto& r : rotations) q.push_back(matrix_to_quat(r));
      return EstimateSet(std::move(q));
    }
    case Algorithm::mrp: {
      std::vector<MrpVector> psi;
      psi.reserve(rotations.size());
      for (const auto& r : rotations) psi.push_back(mrp_project(matrix_to_quat(r)));
      return EstimateSet(std::move(psi));
    }
  }
  throw std::invalid_argument("unknown algorithm");
}

Algorithm EstimateSet::algorithm() const {
  switch (values_.index()) {
    case 0: return Algorithm::so3;
    case 1: return Algorithm::quaternion;
    default: return Algorithm::mrp;
  }
}

std::size_t EstimateSet::size() const {
  return std::visit([](const auto& v) { return v.size(); }, values_);
}

UnitQuaternion EstimateSet::quaternion(std::size_t i) const {
  switch (values_.index()) {
    case 0: return matrix_to_quat(so3().at(i));
    case 1: return quaternions().at(i);
    default: return mrp_unproject(mrp().at(i));
  }
}

RotationMatrix EstimateSet::rotation(std::size_t i) const {
  if (values_.index() == 0) return so3().at(i);
  return quat_to_matrix(quaternion(i));
}

std::vector<RotationMatrix> EstimateSet::rotations() const {
  if (values_.index() == 0) return so3();
  std::vector<RotationMatrix> out;
  out.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) out.push_back(rotation(i));
  return out;
}

// ---------------------------------------------------------------------------
// Per-pair terms

UnitQuaternion target_quaternion(const UnitQuaternion& q_ij, const UnitQuaternion& qhat_j) {
  return quat_mul(q_ij, qhat_j);
}

MrpPairTerm mrp_loss_and_grad(const MrpVector& psi_i, const MrpVector& psi_j, const UnitQuaternion& q_ij) {
  const UnitQuaternion target = target_quaternion(q_ij, mrp_unproject(psi_j));
  constexpr double inf = std::numeric_limits<double>::infinity();

  MrpPairTerm out;
  MrpVector plus = MrpVector::Zero();
  MrpVector minus = MrpVector::Zero();
  out.loss_plus = inf;
  out.loss_minus = inf;
  // At most one antipode can be at the south pole.
  if (target.rho > -1.0 + kSouthPoleTolerance) {
    plus = mrp_project(target);
    out.loss_plus = (psi_i - plus).squaredNorm();
  }
  if (-target.rho > -1.0 + kSouthPoleTolerance) {
    minus = mrp_project(-target);
    out.loss_minus = (psi_i - minus).squaredNorm();
  }
  if (out.loss_plus < out.loss_minus) {
    out.loss = out.loss_plus;
    out.grad = psi_i - plus;
    out.antipode = +1;
  } else {
    out.loss = out.loss_minus;
    out.grad = psi_i - minus;
    out.antipode = -1;
  }
  return out;
}

So3PairTerm so3_loss_and_grad(const RotationMatrix& r_i, const RotationMatrix& r_j, const RotationMatrix& r_ij) {
  So3PairTerm out;
  out.r_delta = log_so3(r_i.transpose() * r_ij * r_j);
  out.loss = out.r_delta.squaredNorm();
  return out;
}

QuaternionPairTerm quaternion_loss_and_grad(const UnitQuaternion& q_i, const UnitQuaternion& q_j,
                                            const UnitQuaternion& q_ij) {
  const UnitQuaternion target = target_quaternion(q_ij, q_j);
  const double d = q_i.dot(target);
  return {1.0 - d * d, -2.0 * d * target.coeffs()};
}

MrpVector clamp_norm(const MrpVector& v, double max_norm) {
  const double n = v.norm();
  if (n > max_norm) return v * (max_norm / n);
  return v;
}

// ---------------------------------------------------------------------------
// Batch steps

std::vector<NodeId> sample_batch(std::size_t n, std::size_t batch_size, std::mt19937_64& rng) {
  std::uniform_int_distribution<NodeId> pick(0, static_cast<NodeId>(n - 1));
  std::vector<NodeId> batch;
  batch.reserve(batch_size);
  const bool distinct = batch_size <= n;
  while (batch.size() < batch_size) {
    const NodeId i = pick(rng);
    if (distinct && std::find(batch.begin(), batch.end(), i) != batch.end()) continue;
    batch.push_back(i);
  }
  return batch;
}

namespace {

const Neighbor* sample_neighbor(const RotationEnvironment& env, NodeId i, std::mt19937_64& rng) {
  const auto& nbs = env.neighbors(i);
  if (nbs.empty()) return nullptr;
  std::uniform_int_distribution<std::size_t> pick(0, nbs.size() - 1);
  return &nbs[pick(rng)];
}

void require(const EstimateSet& estimates, Algorithm algo, const RotationEnvironment& env) {
  if (estimates.algorithm() != algo) {
    throw std::invalid_argument(std::string("estimates are not in the ") + std::string(to_string(algo)) +
                                " parameterization");
  }
  if (estimates.size() != env.size()) {
    throw std::invalid_argument("estimate count does not match the environment");
  }
}

}  // namespace

StepReport mrp_step(EstimateSet& estimates, const RotationEnvironment& env, const OptimizerConfig& cfg,
                    std::mt19937_64& rng) {
  require(estimates, Algorithm::mrp, env);
  auto& psi = estimates.mrp();
  StepReport report;
  report.pairs.reserve(cfg.batch_size);
  for (const NodeId i : sample_batch(env.size(), cfg.batch_size, rng)) {
    const Neighbor* nb = sample_neighbor(env, i, rng);
    if (!nb) continue;
    const MrpPairTerm term = mrp_loss_and_grad(psi[i], psi[nb->j], nb->rel);
    const MrpVector delta = -cfg.step_size() * clamp_norm(term.grad, cfg.eta);
    report.pairs.push_back({i, nb->j, term.loss, delta});
  }
  for (const auto& p : report.pairs) psi[p.i] += p.update;
  return report;
}

StepReport so3_step(EstimateSet& estimates, const RotationEnvironment& env, const OptimizerConfig& cfg,
                    std::mt19937_64& rng) {
  require(estimates, Algorithm::so3, env);
  auto& r = estimates.so3();
  StepReport report;
  report.pairs.reserve(cfg.batch_size);
  for (const NodeId i : sample_batch(env.size(), cfg.batch_size, rng)) {
    const Neighbor* nb = sample_neighbor(env, i, rng);
    if (!nb) continue;
    const So3PairTerm term = so3_loss_and_grad(r[i], r[nb->j], nb->rel_matrix);
    report.pairs.push_back({i, nb->j, term.loss, cfg.step_size() * term.r_delta});
  }
  for (const auto& p : report.pairs) r[p.i] = r[p.i] * exp_so3(p.update);
  return report;
}

StepReport quaternion_step(EstimateSet& estimates, const RotationEnvironment& env, const OptimizerConfig& cfg,
                           std::mt19937_64& rng) {
  require(estimates, Algorithm::quaternion, env);
  auto& q = estimates.quaternions();
  StepReport report;
  report.pairs.reserve(cfg.batch_size);
  for (const NodeId i : sample_batch(env.size(), cfg.batch_size, rng)) {
    const Neighbor* nb = sample_neighbor(env, i, rng);
    if (!nb) continue;
    const QuaternionPairTerm term = quaternion_loss_and_grad(q[i], q[nb->j], nb->rel);
    report.pairs.push_back({i, nb->j, term.loss, -cfg.step_size() * term.grad});
  }
  for (const auto& p : report.pairs) {
    const Vec4 moved = q[p.i].coeffs() + p.update;
    if (moved.norm() > 1e-12) q[p.i] = UnitQuaternion::from_coeffs(moved);
  }
  return report;
}

StepReport step(EstimateSet& estimates, const RotationEnvironment& env, const OptimizerConfig& cfg,
                std::mt19937_64& rng) {
  switch (estimates.algorithm()) {
    case Algorithm::so3: return so3_step(estimates, env, cfg, rng);
    case Algorithm::quaternion: return quaternion_step(estimates, env, cfg, rng);
    case Algorithm::mrp: return mrp_step(estimates, env, cfg, rng);
  }
  throw std::logic_error("unknown algorithm");
}

UpdateVector expected_update(const EstimateSet& estimates, const RotationEnvironment& env, NodeId i) {
  const auto& nbs = env.neighbors(i);
  if (nbs.empty()) throw std::invalid_argument("node has no neighbors");
  const double w = 1.0 / static_cast<double>(nbs.size());

  switch (estimates.algorithm()) {
    case Algorithm::so3: {
      Vec3 sum = Vec3::Zero();
      for (const auto& nb : nbs) {
        sum += so3_loss_and_grad(estimates.so3()[i], estimates.so3()[nb.j], nb.rel_matrix).r_delta;
      }
      return w * sum;
    }
    case Algorithm::quaternion: {
      Vec4 sum = Vec4::Zero();
      for (const auto& nb : nbs) {
        sum += quaternion_loss_and_grad(estimates.quaternions()[i], estimates.quaternions()[nb.j], nb.rel).grad;
      }
      return w * sum;
    }
    case Algorithm::mrp: {
      Vec3 sum = Vec3::Zero();
      for (const auto& nb : nbs) {
        sum += mrp_loss_and_grad(estimates.mrp()[i], estimates.mrp()[nb.j], nb.rel).grad;
      }
      return w * sum;
    }
  }
  throw std::logic_error("unknown algorithm");
}

EstimateSet initial_estimates(std::size_t n, const OptimizerConfig& cfg, std::mt19937_64& rng) {
  std::vector<RotationMatrix> init(n, RotationMatrix::Identity());
  if (cfg.init == InitMode::haar_random) {
    for (auto& r : init) r = quat_to_matrix(sample_uniform_rotation(rng));
  }
  return EstimateSet::from_rotations(cfg.algorithm, init);
}

namespace {

RunResult run_loop(const RotationEnvironment& env, const OptimizerConfig& cfg, EstimateSet estimates,
                   std::mt19937_64& rng) {
  RunResult out;
  out.trace.push_back(evaluate_checkpoint(0, estimates.rotations(), env));
  for (std::size_t it = 1; it <= cfg.max_iters; ++it) {
    step(estimates, env, cfg, rng);
    const bool cadence = cfg.checkpoint_every > 0 && it % cfg.checkpoint_every == 0;
    if (cadence || it == cfg.max_iters) {
      out.trace.push_back(evaluate_checkpoint(it, estimates.rotations(), env));
    }
  }
  out.estimates = std::move(estimates);
  return out;
}

}  // namespace

std::mt19937_64 make_optimizer_rng(std::uint64_t seed) {
  // Tagged so optimizer seed s never replays the stream of environment seed s.
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x6f707431u};
  return std::mt19937_64(seq);
}

RunResult run_averaging(const RotationEnvironment& env, const OptimizerConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng = make_optimizer_rng(cfg.seed);
  EstimateSet init = initial_estimates(env.size(), cfg, rng);
  return run_loop(env, cfg, std::move(init), rng);
}

RunResult run_averaging(const RotationEnvironment& env, const OptimizerConfig& cfg, EstimateSet initial) {
  cfg.validate();
  if (initial.algorithm() != cfg.algorithm) {
    initial = EstimateSet::from_rotations(cfg.algorithm, initial.rotations());
  }
  if (initial.size() != env.size()) throw std::invalid_argument("estimate count does not match the environment");
  std::mt19937_64 rng = make_optimizer_rng(cfg.seed);
  return run_loop(env, cfg, std::move(initial), rng);
}

}  // namespace rotavg
