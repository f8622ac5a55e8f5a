#pragma once

#include "stoshield/edge_importance.hpp"
#include "stoshield/reaction_graph.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace stoshield {

struct ERConfig {
  std::size_t n = 50;
  double p = 0.5;
  std::uint64_t seed = 1;
  std::size_t samples = 10;
  std::size_t threads = 0;

  /// Throws SchemaError unless 0 < p ≤ 1 and n ≥ 3.
  void validate() const;
};

struct ERSample {
  ReactionNetwork network;
  std::size_t rejections = 0;
};

/// Symmetric ER graph with unit rates: each unordered pair {i, j}, i < j, is
/// kept with probability p and becomes edges i→j then j→i. Disconnected
/// draws are rejected; 1000 consecutive rejections throw ConnectivityError.
/// Sample `index` uses its own keyed stream.
ERSample sample_er(const ERConfig& cfg, std::size_t index = 0);

/// Eigenvector statistics over modes i ≥ 2 of sampled ER Laplacians.
///
/// Index averages for a fixed eigenvector are evaluated exactly from its
/// power sums over distinct index tuples rather than by drawing tuples.
/// The sign of every eigenvector is randomized; the sign-sensitive
/// component mean is estimated from `component_draws` random (i, l) picks.
struct MomentReport {
  std::size_t n = 0;
  std::size_t samples = 0;
  double e_v4 = 0.0, e_v4_se = 0.0;
  double e_cross_ii = 0.0;  ///< mean |E[v_i(l) v_i(l')]|, l ≠ l'
  double e_cross_ij = 0.0;  ///< mean |E[v_i(l) v_j(l')]|, i ≠ j
  double e_sq_sq = 0.0, e_sq_sq_se = 0.0;  ///< E[v_i(l)² v_i(l')²]
  double e_third_sq = 0.0;  ///< E[v_i(l1)² v_i(l2) v_i(l3)], distinct l
  double e_third_lin = 0.0; ///< E[v_i(l1) v_i(l2) v_i(l3) v_i(l4)], distinct l
  double component_mean = 0.0, component_mean_se = 0.0;
  std::size_t component_draws = 0;
  double max_norm_error = 0.0;  ///< max | ‖v_i‖₂ − 1 |
  std::size_t rejections = 0;
};

/// Exact averages of one vector over distinct index tuples, from power sums.
struct IndexMoments {
  double fourth = 0.0;     ///< mean v(l)⁴
  double pair = 0.0;       ///< mean v(l)v(l'), l ≠ l'
  double sq_sq = 0.0;      ///< mean v(l)²v(l')², l ≠ l'
  double third_sq = 0.0;   ///< mean v(l1)²v(l2)v(l3), distinct
  double third_lin = 0.0;  ///< mean v(l1)v(l2)v(l3)v(l4), distinct
};
IndexMoments index_moments(const Eigen::Ref<const Vector>& v);

MomentReport eigenvector_moments(const ERConfig& cfg, std::size_t component_draws = 10000);

struct MomentScaling {
  std::vector<MomentReport> rows;
  double q_fit = 0.0;      ///< E[v⁴] ∝ n^−q
  double intercept = 0.0;  ///< log E[v⁴] at n = 1
};

/// eigenvector_moments on every n of the grid followed by a log-log fit.
MomentScaling moment_scaling(const std::vector<std::size_t>& n_grid, double p, std::uint64_t seed,
                             std::size_t samples, std::size_t threads = 0);

struct SStatistic {
  double value = 0.0;
  std::size_t n = 0;
  double p = 0.0;
};

/// S = (n−1)^−2 Σ_{i,j≥2} −1/(λ_i+λ_j). Uses eigenvalues only.
SStatistic s_statistic(const ReactionNetwork& net, double p = 0.0);
double s_statistic(const ComplexVector& eigenvalues);

struct SSweepRow {
  std::size_t n = 0;
  double p = 0.0;
  double mean_s = 0.0;
  double std_error = 0.0;
  double scaled = 0.0;  ///< mean_s · 2pn
};

std::vector<SSweepRow> s_sweep(const std::vector<double>& p_grid, const std::vector<std::size_t>& n_grid,
                               std::size_t samples, std::uint64_t seed, std::size_t threads = 0);

struct ClusterSummary {
  std::size_t important_count = 0, unimportant_count = 0;
  double important_mean = 0.0, important_min = 0.0, important_max = 0.0;
  double unimportant_mean = 0.0, unimportant_min = 0.0, unimportant_max = 0.0;
  double gap_ratio = 0.0;  ///< min(important)/max(unimportant); +inf without an unimportant edge
};

/// Partition R_k (unit noise) by |Mᵀζ_k|. Needs a binary M.
ClusterSummary rk_clusters(const ReactionNetwork& net, const EdgeImportanceReport& report,
                           const MeasurementVector& M);

struct ClusterExperiment {
  std::vector<ClusterSummary> per_sample;
  std::vector<EdgeImportanceReport> reports;  ///< per sample, for the rank-order listing
  std::vector<std::vector<char>> important;   ///< per sample and edge
  double important_mean = 0.0;                ///< mean over samples of the cluster means
  double unimportant_max = 0.0;               ///< max over all samples
  double gap_ratio_mean = 0.0;
  double gap_ratio_min = 0.0;
  /// Class-wise descending rank-order curves averaged over samples by rank
  /// position (each truncated to the smallest class size of any sample).
  std::vector<double> averaged_important, averaged_unimportant;
  double averaged_unimportant_max = 0.0;
  double averaged_gap_ratio = 0.0;  ///< min(averaged_important)/max(averaged_unimportant)
};

/// M = indicator of nodes 0..n1−1 on `cfg.samples` ER draws.
ClusterExperiment rk_cluster_experiment(const ERConfig& cfg, std::size_t n1);

struct GradedPoint {
  std::size_t sample = 0;
  std::size_t k = 0;
  double x = 0.0;  ///< |Mᵀζ_k|
  double r = 0.0;  ///< R_k
};

struct GradedExperiment {
  std::vector<GradedPoint> points;
  double a_fit = 0.0;  ///< least squares R ≈ a x² through the origin
};

/// M_l ~ Uniform[0,1] per sample, unit noise.
GradedExperiment graded_experiment(const ERConfig& cfg);

/// Sign-randomized eigenvector components (modes i ≥ 2) for QQ analysis.
struct ComponentRow {
  std::size_t sample = 0, mode = 0, index = 0;
  double value = 0.0;
};
std::vector<ComponentRow> eigenvector_components(const ERConfig& cfg);

void write_moments_csv(std::ostream& os, const MomentScaling& scaling);
void write_s_sweep_csv(std::ostream& os, const std::vector<SSweepRow>& rows);
void write_clusters_csv(std::ostream& os, const ClusterExperiment& exp);
void write_graded_csv(std::ostream& os, const GradedExperiment& exp);
void write_components_csv(std::ostream& os, const std::vector<ComponentRow>& rows);

}  // namespace stoshield
