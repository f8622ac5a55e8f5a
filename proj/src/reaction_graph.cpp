#include "stoshield/reaction_graph.hpp"

#include "stoshield/errors.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <queue>
#include <string>
#include <unordered_map>

namespace stoshield {

namespace {

std::string edge_field(std::size_t k, const char* name) {
  return "/edges/" + std::to_string(k) + "/" + name;
}

// True when every node is reachable from node 0 along the given adjacency.
bool all_reachable(std::size_t n,
                   const std::vector<std::vector<std::size_t>>& adj) {
  std::vector<char> seen(n, 0);
  std::queue<std::size_t> frontier;
  frontier.push(0);
  seen[0] = 1;
  std::size_t count = 1;
  while (!frontier.empty()) {
    const auto u = frontier.front();
    frontier.pop();
    for (auto v : adj[u]) {
      if (!seen[v]) {
        seen[v] = 1;
        ++count;
        frontier.push(v);
      }
    }
  }
  return count == n;
}

}  // namespace

ReactionNetwork::ReactionNetwork(std::size_t nodes,
                                 std::initializer_list<EdgeSpec> edges,
                                 std::vector<std::string> labels)
    : ReactionNetwork(nodes, std::span<const EdgeSpec>(edges.begin(), edges.size()),
                      std::move(labels)) {}

ReactionNetwork::ReactionNetwork(std::size_t nodes,
                                 std::span<const EdgeSpec> edges,
                                 std::vector<std::string> labels)
    : nodes_(nodes), labels_(std::move(labels)) {
  if (nodes_ < 1) throw SchemaError("network needs at least one node", "/nodes");
  if (!labels_.empty() && labels_.size() != nodes_)
    throw SchemaError("label count must equal node count", "/labels");

  edges_.reserve(edges.size());
  std::unordered_map<std::size_t, std::size_t> by_pair;
  by_pair.reserve(edges.size() * 2);
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const auto& e = edges[k];
    if (e.from >= nodes_) throw SchemaError("source node out of range", edge_field(k, "from"));
    if (e.to >= nodes_) throw SchemaError("destination node out of range", edge_field(k, "to"));
    if (e.from == e.to) throw SchemaError("self-loops are not allowed", edge_field(k, "to"));
    if (!(e.rate > 0.0) || !std::isfinite(e.rate))
      throw SchemaError("rate must be positive and finite", edge_field(k, "rate"));
    const auto key = e.from * nodes_ + e.to;
    if (!by_pair.emplace(key, k).second)
      throw SchemaError("duplicate directed edge " + std::to_string(e.from) + "->" +
                            std::to_string(e.to),
                        "/edges/" + std::to_string(k));
    edges_.push_back(Edge{k, e.from, e.to, e.rate});
  }

  reverse_.assign(edges_.size(), edges_.size());
  symmetric_ = true;
  for (const auto& e : edges_) {
    const auto it = by_pair.find(e.to * nodes_ + e.from);
    if (it != by_pair.end()) {
      reverse_[e.index] = it->second;
      if (edges_[it->second].rate != e.rate) symmetric_ = false;
    } else {
      symmetric_ = false;
    }
  }

  if (nodes_ > 1) {
    std::vector<std::vector<std::size_t>> fwd(nodes_), bwd(nodes_);
    for (const auto& e : edges_) {
      fwd[e.from].push_back(e.to);
      bwd[e.to].push_back(e.from);
    }
    if (!all_reachable(nodes_, fwd) || !all_reachable(nodes_, bwd))
      throw IrreducibleViolation("reaction graph is not strongly connected");
  }
}

const Edge& ReactionNetwork::edge(std::size_t k) const {
  if (k >= edges_.size())
    throw IndexError("edge index " + std::to_string(k) + " out of range [0, " +
                     std::to_string(edges_.size()) + ")");
  return edges_[k];
}

std::size_t ReactionNetwork::reverse_of(std::size_t k) const {
  return reverse_.at(edge(k).index);
}

Vector ReactionNetwork::out_rates() const {
  Vector d = Vector::Zero(static_cast<Eigen::Index>(nodes_));
  for (const auto& e : edges_) d[e.from] += e.rate;
  return d;
}

MeasurementVector::MeasurementVector(Vector values) : values_(std::move(values)) {
  for (Eigen::Index i = 0; i < values_.size(); ++i)
    if (!std::isfinite(values_[i]))
      throw SchemaError("measurement entries must be finite",
                        "/measurement/" + std::to_string(i));
}

MeasurementVector MeasurementVector::indicator(std::size_t n,
                                               std::span<const std::size_t> ones) {
  Vector v = Vector::Zero(static_cast<Eigen::Index>(n));
  for (auto i : ones) {
    if (i >= n) throw IndexError("measurement index out of range");
    v[static_cast<Eigen::Index>(i)] = 1.0;
  }
  return MeasurementVector(std::move(v));
}

bool MeasurementVector::is_binary() const noexcept {
  return (values_.array() == 0.0 || values_.array() == 1.0).all();
}

bool MeasurementVector::is_unit_interval() const noexcept {
  return (values_.array() >= 0.0 && values_.array() <= 1.0).all();
}

const char* to_string(NoiseMode mode) noexcept {
  switch (mode) {
    case NoiseMode::Unit: return "unit";
    case NoiseMode::StationaryFlux: return "stationary-flux";
    case NoiseMode::Explicit: return "explicit";
  }
  return "unknown";
}

Matrix build_laplacian(const ReactionNetwork& net) {
  const auto n = static_cast<Eigen::Index>(net.node_count());
  Matrix L = Matrix::Zero(n, n);
  for (const auto& e : net.edges()) {
    L(e.to, e.from) += e.rate;
    L(e.from, e.from) -= e.rate;
  }
  return L;
}

StoichiometryVector stoichiometry(const ReactionNetwork& net, std::size_t k) {
  const auto& e = net.edge(k);
  StoichiometryVector z{Eigen::VectorXi::Zero(static_cast<Eigen::Index>(net.node_count()))};
  z.entries[e.from] = -1;
  z.entries[e.to] = 1;
  return z;
}

Vector stationary_distribution(const ReactionNetwork& net) {
  const auto n = static_cast<Eigen::Index>(net.node_count());
  if (n == 1) return Vector::Ones(1);

  const Matrix L = build_laplacian(net);
  Eigen::BDCSVD<Matrix> svd(L);
  const Vector& sv = svd.singularValues();  // descending
  if (sv[n - 2] <= 1e-13 * sv[0])
    throw DegenerateKernel("Laplacian kernel has dimension > 1 (singular values " +
                           std::to_string(sv[n - 2]) + ", " + std::to_string(sv[n - 1]) +
                           ")");

  // GTH: censor states n-1, ..., 1 in turn, then back-substitute.
  Matrix a = Matrix::Zero(n, n);
  for (const auto& e : net.edges()) a(e.from, e.to) = e.rate;
  for (Eigen::Index k = n - 1; k > 0; --k) {
    const double s = a.row(k).head(k).sum();
    if (!(s > 0.0)) throw DegenerateKernel("state reduction hit a zero exit rate");
    a.col(k).head(k) /= s;
    for (Eigen::Index i = 0; i < k; ++i) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (Eigen::Index j = 0; j < k; ++j)
        if (j != i) a(i, j) += aik * a(k, j);
    }
  }
  Vector pi = Vector::Zero(n);
  pi[0] = 1.0;
  for (Eigen::Index k = 1; k < n; ++k) pi[k] = pi.head(k).dot(a.col(k).head(k));
  pi /= pi.sum();
  return pi;
}

Vector noise_sigmas(const ReactionNetwork& net, const NoiseSpec& spec) {
  const auto m = static_cast<Eigen::Index>(net.edge_count());
  Vector sigma(m);
  switch (spec.mode) {
    case NoiseMode::Unit:
      sigma.setOnes();
      break;
    case NoiseMode::StationaryFlux: {
      if (!(spec.population > 0.0) || !std::isfinite(spec.population))
        throw SchemaError("stationary-flux noise requires population > 0",
                          "/noise/population");
      const Vector occupancy = stationary_distribution(net) * spec.population;
      for (const auto& e : net.edges())
        sigma[static_cast<Eigen::Index>(e.index)] = std::sqrt(occupancy[e.from] * e.rate);
      break;
    }
    case NoiseMode::Explicit:
      if (spec.sigmas.size() != net.edge_count())
        throw SchemaError("explicit noise needs one sigma per edge", "/noise/sigmas");
      for (Eigen::Index k = 0; k < m; ++k) {
        const double s = spec.sigmas[static_cast<std::size_t>(k)];
        if (!(s >= 0.0) || !std::isfinite(s))
          throw SchemaError("sigma must be finite and >= 0",
                            "/noise/sigmas/" + std::to_string(k));
        sigma[k] = s;
      }
      break;
  }
  return sigma;
}

Matrix noise_matrix(const ReactionNetwork& net, const NoiseSpec& spec) {
  const Vector sigma = noise_sigmas(net, spec);
  Matrix B = Matrix::Zero(static_cast<Eigen::Index>(net.node_count()),
                          static_cast<Eigen::Index>(net.edge_count()));
  for (const auto& e : net.edges()) {
    const auto k = static_cast<Eigen::Index>(e.index);
    B(e.from, k) = -sigma[k];
    B(e.to, k) = sigma[k];
  }
  return B;
}

}  // namespace stoshield
