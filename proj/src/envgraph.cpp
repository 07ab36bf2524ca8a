#include "rotavg/envgraph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <set>

namespace rotavg {

RotationEnvironment::RotationEnvironment(std::size_t n_nodes, std::vector<Edge> edges,
                                         std::optional<std::vector<UnitQuaternion>> ground_truth,
                                         bool exact, std::string provenance)
    : n_nodes_(n_nodes),
      edges_(std::move(edges)),
      ground_truth_(std::move(ground_truth)),
      exact_(exact),
      provenance_(std::move(provenance)),
      neighborhoods_(n_nodes) {
  if (ground_truth_ && ground_truth_->size() != n_nodes_) {
    throw std::invalid_argument("ground truth has " + std::to_string(ground_truth_->size()) +
                                " rotations for " + std::to_string(n_nodes_) + " nodes");
  }
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    const Edge& edge = edges_[e];
    if (edge.i >= n_nodes_ || edge.j >= n_nodes_) {
      throw std::invalid_argument("edge " + std::to_string(e) + " references a node out of range");
    }
    if (edge.i == edge.j) {
      throw std::invalid_argument("edge " + std::to_string(e) + " is a self-loop");
    }
    const UnitQuaternion back = quat_conjugate(edge.rel);
    neighborhoods_[edge.i].push_back({edge.j, e, edge.rel, quat_to_matrix(edge.rel)});
    neighborhoods_[edge.j].push_back({edge.i, e, back, quat_to_matrix(back)});
  }
}

std::vector<RotationMatrix> RotationEnvironment::ground_truth_matrices() const {
  std::vector<RotationMatrix> out;
  out.reserve(n_nodes_);
  for (const auto& q : ground_truth()) out.push_back(quat_to_matrix(q));
  return out;
}

bool RotationEnvironment::is_connected() const {
  if (n_nodes_ == 0) return false;
  std::vector<char> seen(n_nodes_, 0);
  std::vector<NodeId> stack{0};
  seen[0] = 1;
  std::size_t reached = 1;
  while (!stack.empty()) {
    const NodeId u = stack.back();
    stack.pop_back();
    for (const Neighbor& nb : neighborhoods_[u]) {
      if (!seen[nb.j]) {
        seen[nb.j] = 1;
        ++reached;
        stack.push_back(nb.j);
      }
    }
  }
  return reached == n_nodes_;
}

bool operator==(const RotationEnvironment& a, const RotationEnvironment& b) {
  auto same_quat = [](const UnitQuaternion& x, const UnitQuaternion& y) {
    return x.coeffs() == y.coeffs();
  };
  if (a.n_nodes_ != b.n_nodes_ || a.exact_ != b.exact_ || a.provenance_ != b.provenance_ ||
      a.edges_.size() != b.edges_.size() || a.ground_truth_.has_value() != b.ground_truth_.has_value()) {
    return false;
  }
  for (std::size_t e = 0; e < a.edges_.size(); ++e) {
    const Edge& x = a.edges_[e];
    const Edge& y = b.edges_[e];
    if (x.i != y.i || x.j != y.j || !same_quat(x.rel, y.rel)) return false;
  }
  if (a.ground_truth_) {
    for (std::size_t n = 0; n < a.n_nodes_; ++n) {
      if (!same_quat((*a.ground_truth_)[n], (*b.ground_truth_)[n])) return false;
    }
  }
  return true;
}

std::uint64_t derive_generation_seed(std::uint64_t seed, int attempt) {
  return seed * 0x9E3779B9ULL + static_cast<std::uint64_t>(attempt);
}

namespace {

std::set<std::pair<NodeId, NodeId>> neighbor_pairs(const std::vector<UnitQuaternion>& gt,
                                                   const NeighborhoodMode& mode) {
  const std::size_t n = gt.size();
  std::vector<double> dist(n * n, 0.0);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      const double d = quat_angle(quat_mul(quat_conjugate(gt[a]), gt[b]));
      dist[a * n + b] = d;
      dist[b * n + a] = d;
    }
  }

  std::set<std::pair<NodeId, NodeId>> pairs;
  auto add = [&](std::size_t a, std::size_t b) {
    pairs.emplace(static_cast<NodeId>(std::min(a, b)), static_cast<NodeId>(std::max(a, b)));
  };

  if (const auto* knn = std::get_if<KnnNeighborhood>(&mode)) {
    const std::size_t k = std::min(knn->k, n - 1);
    std::vector<std::size_t> order(n);
    for (std::size_t a = 0; a < n; ++a) {
      std::iota(order.begin(), order.end(), 0);
      std::erase(order, a);
      std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                        [&](std::size_t x, std::size_t y) {
                          const double dx = dist[a * n + x], dy = dist[a * n + y];
                          return dx < dy || (dx == dy && x < y);
                        });
      for (std::size_t r = 0; r < k; ++r) add(a, order[r]);
      order.resize(n);
    }
  } else {
    const double eps = std::get<EpsilonNeighborhood>(mode).epsilon;
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a + 1; b < n; ++b) {
        if (dist[a * n + b] < eps) add(a, b);
      }
    }
  }
  return pairs;
}

std::string describe(const GeneratorConfig& cfg, std::uint64_t used_seed) {
  std::string mode;
  if (const auto* knn = std::get_if<KnnNeighborhood>(&cfg.neighborhood)) {
    mode = "k=" + std::to_string(knn->k);
  } else {
    char buf[64];
    std::snprintf(buf, sizeof buf, "epsilon=%.17g", std::get<EpsilonNeighborhood>(cfg.neighborhood).epsilon);
    mode = buf;
  }
  return "generated:n=" + std::to_string(cfg.n_nodes) + "," + mode + ",seed=" + std::to_string(cfg.seed) +
         ",derived_seed=" + std::to_string(used_seed);
}

}  // namespace

RotationEnvironment generate_uniform_env(const GeneratorConfig& cfg) {
  if (cfg.n_nodes < 2) throw std::invalid_argument("n_nodes must be at least 2");
  if (const auto* knn = std::get_if<KnnNeighborhood>(&cfg.neighborhood); knn && knn->k < 1) {
    throw std::invalid_argument("k_neighbors must be at least 1");
  }
  if (const auto* eps = std::get_if<EpsilonNeighborhood>(&cfg.neighborhood); eps && !(eps->epsilon > 0.0)) {
    throw std::invalid_argument("epsilon must be positive");
  }

  for (int attempt = 0; attempt < kMaxGenerationAttempts; ++attempt) {
    const std::uint64_t seed = derive_generation_seed(cfg.seed, attempt);
    std::mt19937_64 rng(seed);
    std::vector<UnitQuaternion> gt(cfg.n_nodes);
    for (auto& q : gt) q = sample_uniform_rotation(rng);

    std::vector<Edge> edges;
    for (const auto& [a, b] : neighbor_pairs(gt, cfg.neighborhood)) {
      edges.push_back({a, b, quat_mul(gt[a], quat_conjugate(gt[b]))});
    }
    RotationEnvironment env(cfg.n_nodes, std::move(edges), std::move(gt), true, describe(cfg, seed));
    if (env.is_connected()) return env;
  }
  throw ConnectivityFailure("no connected neighborhood graph after " +
                            std::to_string(kMaxGenerationAttempts) + " attempts (n=" +
                            std::to_string(cfg.n_nodes) + ")");
}

std::vector<std::pair<NodeId, UnitQuaternion>> neighborhood_of(const RotationEnvironment& env, NodeId i) {
  std::vector<std::pair<NodeId, UnitQuaternion>> out;
  for (const Neighbor& nb : env.neighbors(i)) out.emplace_back(nb.j, nb.rel);
  return out;
}

CriticalFixture build_critical_env(const Vec3& omega0, double theta0, const RotationMatrix& r0,
                                   const std::vector<RotationMatrix>& ground_truth) {
  const std::size_t n = ground_truth.size();
  if (n < 2) throw std::invalid_argument("critical fixture needs at least two nodes");
  const Vec3 axis = omega0.normalized();

  std::vector<UnitQuaternion> gt;
  gt.reserve(n);
  for (const auto& r : ground_truth) gt.push_back(matrix_to_quat(r));

  std::vector<Edge> edges;
  for (NodeId a = 0; a < n; ++a) {
    for (NodeId b = a + 1; b < n; ++b) {
      edges.push_back({a, b, matrix_to_quat(ground_truth[a] * ground_truth[b].transpose())});
    }
  }

  CriticalFixture out{RotationEnvironment(n, std::move(edges), std::move(gt), true, "critical-fixture"), {}};
  const double spacing = 2.0 * std::numbers::pi / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.estimates.push_back(ground_truth[i] * r0 *
                            exp_so3((theta0 + static_cast<double>(i) * spacing) * axis));
  }
  return out;
}

std::vector<RotationMatrix> evenly_spaced_ground_truth(const Vec3& omega0, double theta0, std::size_t n) {
  const Vec3 axis = omega0.normalized();
  const double spacing = 2.0 * std::numbers::pi / static_cast<double>(n);
  std::vector<RotationMatrix> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(exp_so3(-(theta0 + static_cast<double>(i) * spacing) * axis));
  }
  return out;
}

}  // namespace rotavg
