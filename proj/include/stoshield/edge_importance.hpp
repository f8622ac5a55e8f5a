#pragma once

#include "stoshield/reaction_graph.hpp"
#include "stoshield/spectral.hpp"

#include <cstddef>
#include <iosfwd>
#include <vector>

namespace stoshield {

/// Per-edge deficiency contributions R_k for one measurement.
struct EdgeImportanceReport {
  Vector values;                     ///< R_k, clamped to >= 0
  std::vector<std::size_t> ranking;  ///< edge indices by descending R_k, ties by index
  Vector measurement;
  Vector sigmas;

  /// 0-based rank position of every edge (inverse of `ranking`).
  std::vector<std::size_t> rank_of() const;
};

struct ReductionPlan {
  std::vector<std::size_t> neglected;  ///< sorted, unique
  double predicted_error = 0.0;
};

/// R_k = σ_k² Σ_{i,j≥2} −1/(λ_i+λ_j) (Mᵀv_i)(w_iᵀζ_k)(ζ_kᵀw_j)(v_jᵀM).
EdgeImportanceReport edge_importance(const ReactionNetwork& net, const EigenSystem& eig,
                                     const MeasurementVector& M, const NoiseSpec& spec);

/// Convenience: builds L and decomposes it first.
EdgeImportanceReport edge_importance(const ReactionNetwork& net, const MeasurementVector& M,
                                     const NoiseSpec& spec);

/// Σ_{k∈ℰ'} R_k. Throws IndexError for out-of-range edges.
double total_deficiency(const EdgeImportanceReport& report, const ReductionPlan& plan);

/// Plan for an explicit edge set; duplicates are removed.
ReductionPlan make_plan(const EdgeImportanceReport& report, std::vector<std::size_t> neglected);

/// Neglect the `budget` least important edges (ties go to the lower index).
ReductionPlan optimal_reduction(const EdgeImportanceReport& report, std::size_t budget);

/// Leading-order E[R_k] = σ_k² |Mᵀζ_k| / (n C), C = 2 μ_A. Requires binary M.
double theorem2_prediction(const ReactionNetwork& net, const MeasurementVector& M,
                           std::size_t k, double mean_edge_weight,
                           const NoiseSpec& spec = NoiseSpec::unit());

/// Graded form σ_k² (Mᵀζ_k)² / (n C). Requires M in [0,1]^n.
double graded_prediction(const ReactionNetwork& net, const MeasurementVector& M,
                         std::size_t k, double mean_edge_weight,
                         const NoiseSpec& spec = NoiseSpec::unit());

/// CSV with header k,from,to,rate,sigma,R_k,rank (rank is 0-based, 0 = most important).
void write_importance_csv(std::ostream& os, const ReactionNetwork& net,
                          const EdgeImportanceReport& report);

}  // namespace stoshield
