// Rotation-averaging problem instances: nodes, relative-rotation edges,
// neighborhoods and optional ground truth.
//
// Edge (i, j, q) stores the relative rotation q_i^j with R_i = R_i^j R_j.
#pragma once

#include "rotavg/rotmath.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace rotavg {

using NodeId = std::uint32_t;

struct Edge {
  NodeId i = 0;
  NodeId j = 0;
  UnitQuaternion rel;  // q_i^j
};

/// One entry of a neighborhood list, already oriented for the owning node:
/// rel is q_i^j even when the stored edge runs j -> i.
struct Neighbor {
  NodeId j = 0;
  std::size_t edge = 0;
  UnitQuaternion rel;
  RotationMatrix rel_matrix;
};

class ConnectivityFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RotationEnvironment {
 public:
  RotationEnvironment() = default;

  /// Validates ids and self-loops, then builds the neighborhoods. Throws
  /// std::invalid_argument on malformed input. Connectivity is not required
  /// here; see is_connected().
  RotationEnvironment(std::size_t n_nodes, std::vector<Edge> edges,
                      std::optional<std::vector<UnitQuaternion>> ground_truth = std::nullopt,
                      bool exact = false, std::string provenance = {});

  std::size_t size() const { return n_nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<Neighbor>& neighbors(NodeId i) const { return neighborhoods_.at(i); }

  bool has_ground_truth() const { return ground_truth_.has_value(); }
  const std::vector<UnitQuaternion>& ground_truth() const { return ground_truth_.value(); }
  std::vector<RotationMatrix> ground_truth_matrices() const;

  /// True when every edge is derived exactly from the ground truth.
  bool exact() const { return exact_; }
  const std::string& provenance() const { return provenance_; }

  bool is_connected() const;

  friend bool operator==(const RotationEnvironment& a, const RotationEnvironment& b);

 private:
  std::size_t n_nodes_ = 0;
  std::vector<Edge> edges_;
  std::optional<std::vector<UnitQuaternion>> ground_truth_;
  bool exact_ = false;
  std::string provenance_;
  std::vector<std::vector<Neighbor>> neighborhoods_;
};

struct KnnNeighborhood {
  std::size_t k = 3;
};
struct EpsilonNeighborhood {
  double epsilon = 0.0;  // radians
};
using NeighborhoodMode = std::variant<KnnNeighborhood, EpsilonNeighborhood>;

struct GeneratorConfig {
  std::size_t n_nodes = 100;
  std::uint64_t seed = 0;
  NeighborhoodMode neighborhood = KnnNeighborhood{3};
};

inline constexpr int kMaxGenerationAttempts = 100;

/// Seed used for the given regeneration attempt (attempt 0 is the first try).
std::uint64_t derive_generation_seed(std::uint64_t seed, int attempt);

/// Haar-uniform ground truth, neighborhoods from the configured rule
/// (directed kNN relations symmetrized by union), exact relative rotations.
/// Regenerates until connected; throws ConnectivityFailure after
/// kMaxGenerationAttempts.
RotationEnvironment generate_uniform_env(const GeneratorConfig& cfg);

/// The symmetrized neighbor list of node i as (j, q_i^j) pairs.
std::vector<std::pair<NodeId, UnitQuaternion>> neighborhood_of(const RotationEnvironment& env,
                                                               NodeId i);

/// Initial estimates R_hat_i = R_i R0 exp((theta0 + i 2pi/n) omega0) together
/// with a fully connected n-node environment over the given ground truth.
struct CriticalFixture {
  RotationEnvironment env;
  std::vector<RotationMatrix> estimates;
};

CriticalFixture build_critical_env(const Vec3& omega0, double theta0, const RotationMatrix& r0,
                                   const std::vector<RotationMatrix>& ground_truth);

/// Ground truth evenly spaced about omega0 such that the construction above
/// with R0 = I places every estimate at the identity:
/// R_i = exp(-(theta0 + i 2pi/n) omega0).
std::vector<RotationMatrix> evenly_spaced_ground_truth(const Vec3& omega0, double theta0,
                                                       std::size_t n = 3);

}  // namespace rotavg
