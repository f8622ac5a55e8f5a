#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace stoshield {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// One first-order reaction: individuals at `from` move to `to` with per
/// capita rate `rate` (1/time). Indices are 0-based.
struct Edge {
  std::size_t index = 0;
  std::size_t from = 0;
  std::size_t to = 0;
  double rate = 0.0;
};

/// Input form of an edge; the network assigns the index.
struct EdgeSpec {
  std::size_t from = 0;
  std::size_t to = 0;
  double rate = 0.0;
};

/// Directed weighted reaction graph. Immutable once constructed.
///
/// Construction enforces: endpoints in range, no self-loops, no duplicate
/// ordered pairs, strictly positive finite rates, strong connectivity.
/// Violations throw SchemaError, except reducibility which throws
/// IrreducibleViolation.
class ReactionNetwork {
 public:
  ReactionNetwork(std::size_t nodes, std::span<const EdgeSpec> edges,
                  std::vector<std::string> labels = {});
  ReactionNetwork(std::size_t nodes, std::initializer_list<EdgeSpec> edges,
                  std::vector<std::string> labels = {});

  std::size_t node_count() const noexcept { return nodes_; }
  std::size_t edge_count() const noexcept { return edges_.size(); }
  std::span<const Edge> edges() const noexcept { return edges_; }
  const Edge& edge(std::size_t k) const;
  const std::vector<std::string>& labels() const noexcept { return labels_; }

  /// True when every edge i→j has a reverse edge j→i with the same rate.
  bool has_symmetric_rates() const noexcept { return symmetric_; }

  /// Index of the edge j→i for edge k, or edge_count() if there is none.
  std::size_t reverse_of(std::size_t k) const;

  /// Total outgoing rate of every node (diagonal of D).
  Vector out_rates() const;

 private:
  std::size_t nodes_;
  std::vector<Edge> edges_;
  std::vector<std::string> labels_;
  std::vector<std::size_t> reverse_;
  bool symmetric_ = false;
};

/// ζ_k: −1 at the source node, +1 at the destination, zero elsewhere.
struct StoichiometryVector {
  Eigen::VectorXi entries;

  Vector as_real() const { return entries.cast<double>(); }
};

/// Linear readout M. Either binary ({0,1}) or graded (real, all finite).
class MeasurementVector {
 public:
  explicit MeasurementVector(Vector values);

  /// Binary vector of length n with ones at `ones`.
  static MeasurementVector indicator(std::size_t n,
                                     std::span<const std::size_t> ones);

  const Vector& values() const noexcept { return values_; }
  std::size_t size() const noexcept {
    return static_cast<std::size_t>(values_.size());
  }
  bool is_binary() const noexcept;
  bool is_unit_interval() const noexcept;

  /// Mᵀζ_k for the edge.
  double across(const Edge& e) const { return values_[e.to] - values_[e.from]; }

 private:
  Vector values_;
};

enum class NoiseMode { Unit, StationaryFlux, Explicit };

/// How the per-edge noise amplitudes σ_k are chosen.
///
/// Unit sets σ_k = 1. StationaryFlux sets σ_k = sqrt(N̄_{i(k)} α_k) with
/// N̄ = π·N_tot. Explicit takes σ_k from `sigmas`.
struct NoiseSpec {
  NoiseMode mode = NoiseMode::Unit;
  std::vector<double> sigmas;
  double population = 0.0;

  static NoiseSpec unit() { return {}; }
  static NoiseSpec stationary_flux(double n_tot) {
    return {NoiseMode::StationaryFlux, {}, n_tot};
  }
  static NoiseSpec explicit_sigmas(std::vector<double> s) {
    return {NoiseMode::Explicit, std::move(s), 0.0};
  }
};

const char* to_string(NoiseMode mode) noexcept;

/// L = (A − D)ᵀ; column sums vanish.
Matrix build_laplacian(const ReactionNetwork& net);

StoichiometryVector stoichiometry(const ReactionNetwork& net, std::size_t k);

/// Stationary law π with Lπ = 0, π ≥ 0, Σπ = 1.
///
/// π itself comes from GTH state reduction, which is subtraction free and
/// keeps relative accuracy in states with tiny occupancy. The singular
/// values of L gate the call: a second (near) zero singular value throws
/// DegenerateKernel.
Vector stationary_distribution(const ReactionNetwork& net);

/// Per-edge σ_k for the spec. Validates σ_k ≥ 0 and N_tot > 0.
Vector noise_sigmas(const ReactionNetwork& net, const NoiseSpec& spec);

/// n×m noise matrix whose column k is σ_k ζ_k.
Matrix noise_matrix(const ReactionNetwork& net, const NoiseSpec& spec);

}  // namespace stoshield
