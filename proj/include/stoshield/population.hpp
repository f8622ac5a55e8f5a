#pragma once

#include "stoshield/reaction_graph.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace stoshield {

/// Occupancy N(t). Stored as doubles: integer valued for unshielded runs,
/// real valued once shielded edges contribute mean fluxes.
struct PopulationState {
  Vector counts;
  double t = 0.0;

  double total() const { return counts.sum(); }
  /// Largest-remainder rounding of π·N_tot, so the counts sum to N_tot.
  static PopulationState stationary_start(const ReactionNetwork& net, std::uint64_t n_tot);
};

/// Edges whose fluctuations are replaced by their mean.
struct ShieldingMask {
  std::vector<std::size_t> shielded;

  bool empty() const noexcept { return shielded.empty(); }
  std::vector<char> flags(std::size_t edge_count) const;
};

enum class PopulationMethod { Ssa, TauLeap, Multinomial };

PopulationMethod parse_population_method(const std::string& name);
const char* to_string(PopulationMethod m) noexcept;

struct PopulationOptions {
  double t_final = 100.0;
  double burn_in = 0.0;
  std::uint64_t seed = 1;
  std::size_t trial = 0;
  std::size_t record_stride = 0;  ///< 0: no trajectory kept; k: every k-th event/step
};

/// One simulated trajectory plus its stationary summaries over [burn_in, t_final].
struct PopulationRun {
  std::vector<double> times;
  std::vector<Vector> states;
  PopulationState final_state;
  std::size_t steps = 0;          ///< events (SSA) or fixed steps
  std::size_t clamp_events = 0;   ///< node-steps whose outflow was truncated
  std::size_t clamped_steps = 0;  ///< steps with at least one truncation
  bool valid = true;              ///< false when more than 0.1% of steps clamp
  double max_conservation_error = 0.0;
  Vector time_mean;
  Matrix time_cov;
  std::vector<Vector> batch_means;  ///< means over 10 equal windows
};

/// Gillespie direct method.
PopulationRun ssa_exact(const ReactionNetwork& net, const PopulationState& n0,
                        const PopulationOptions& opt);

/// Poisson tau-leaping. Shielded edges move their mean τα_kN_i. Throws
/// TauTooLarge unless τ·max_i D_ii < 1.
PopulationRun tau_leap(const ReactionNetwork& net, const PopulationState& n0, double tau,
                       const PopulationOptions& opt, const ShieldingMask& mask = {});

/// Multinomial destinations per node and step. Throws StepTooLarge when
/// h·max_i D_ii > 1.
PopulationRun discrete_multinomial(const ReactionNetwork& net, const PopulationState& n0, double h,
                                   const PopulationOptions& opt, const ShieldingMask& mask = {});

/// Single-step transition counts N_ij for the multinomial scheme.
///
/// Destinations of the floor(N_i) individuals at node i are drawn with
/// sequential conditional binomials (one uniform per edge, edges in index
/// order); the fractional remainder and shielded edges move their expected
/// count. Stay and shielded categories absorb the leftover probability.
class MultinomialStepper {
 public:
  MultinomialStepper(const ReactionNetwork& net, double h, const ShieldingMask& mask = {});
  /// `u` holds one uniform per edge. Returns per-edge flows (before any clamp).
  Vector flows(const Vector& counts, std::span<const double> u) const;
  double h() const noexcept { return h_; }

 private:
  const ReactionNetwork* net_;
  double h_;
  std::vector<char> shielded_;
  std::vector<std::vector<std::size_t>> out_edges_;
};

/// Poisson single-step flows for tau-leaping with the same conventions.
Vector tau_leap_flows(const ReactionNetwork& net, const Vector& counts, double tau,
                      std::span<const double> u, const std::vector<char>& shielded);

struct PopulationConfig {
  PopulationMethod method = PopulationMethod::TauLeap;
  double step = 1e-2;  ///< τ or h
  double t_final = 1000.0;
  double burn_in = 10.0;
  std::uint64_t seed = 1;
  std::size_t trials = 4;
  std::size_t threads = 0;
};

struct ShieldingErrorReport {
  double variance = 0.0;  ///< stationary Var[Mᵀ(N_shielded − N_full)]
  double std_error = 0.0;
  double full_mean = 0.0;  ///< E[MᵀN_full]
  double full_mean_std_error = 0.0;
  double full_variance = 0.0;  ///< Var[MᵀN_full]
  double full_std_error = 0.0;
  double shielded_variance = 0.0;
  double shielded_std_error = 0.0;
  std::size_t clamp_events = 0;
  bool valid = true;
};

/// Paired shielded/unshielded runs sharing per-edge uniforms, started from
/// the rounded stationary occupancy. Only fixed-step methods pair.
ShieldingErrorReport population_shielding_error(const ReactionNetwork& net,
                                                const MeasurementVector& M, std::uint64_t n_tot,
                                                const ShieldingMask& mask,
                                                const PopulationConfig& cfg);

/// Mean occupancy across runs with its standard error (trial spread, or
/// batch means for a single run).
struct OccupancySummary {
  Vector mean;
  Vector std_error;
  Vector variance;  ///< mean over runs of the time variance per state
};
OccupancySummary summarize_runs(std::span<const PopulationRun> runs);

/// CSV t,N_0..N_{n-1}.
void write_population_csv(std::ostream& os, const PopulationRun& run);

}  // namespace stoshield
