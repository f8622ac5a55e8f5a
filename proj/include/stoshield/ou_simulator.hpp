#pragma once

#include "stoshield/edge_importance.hpp"
#include "stoshield/reaction_graph.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace stoshield {

struct SimConfig {
  double dt = 1e-3;
  double t_final = 100.0;
  double burn_in = 0.0;
  std::uint64_t seed = 1;
  std::size_t trials = 1;
  std::size_t record_stride = 1;  ///< keep every k-th step in stored paths
  std::size_t threads = 0;        ///< 0: default_threads()

  /// Throws SchemaError unless dt > 0, t_final > burn_in >= 0, trials >= 1.
  void validate() const;
  std::size_t steps() const;
};

/// Full and reduced OU paths driven by the same Wiener increments.
struct PairedOUPath {
  std::vector<double> times;
  std::vector<Vector> X;
  std::vector<Vector> X_tilde;
  std::vector<Vector> U;  ///< X_tilde − X
  std::vector<double> Y;
  std::vector<double> Y_tilde;
};

struct HorizonWarning {
  double required = 0.0;   ///< 20 relaxation times
  double available = 0.0;  ///< t_final − burn_in
  std::string message;
};

struct DeficiencyStats {
  double empirical_mse = 0.0;  ///< time-and-trial mean of (MᵀU)²
  double std_error = 0.0;      ///< from 10 batch means per trial, pooled over trials
  double mean_deficiency = 0.0;
  double mean_std_error = 0.0;
  std::size_t trials = 0;
  std::vector<double> per_trial_mse;
  std::optional<HorizonWarning> warning;
};

struct VarianceEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// |Re λ₂|, the slowest relaxation rate.
double relaxation_rate(const EigenSystem& eig);

/// Throws StabilityError (suggesting 0.25/|λ|max) unless dt·|λ|max < 0.5.
void check_stability(const EigenSystem& eig, double dt);

/// Euler–Maruyama for dX = LX dt + B dW and dX̃ = LX̃ dt + B̃ dW from
/// X(0) = X̃(0) = 0. B̃ zeroes the columns in `plan.neglected`. Per-edge
/// increments come from streams keyed by (seed, trial, edge).
PairedOUPath simulate_pair(const ReactionNetwork& net, const MeasurementVector& M,
                           const NoiseSpec& spec, const ReductionPlan& plan,
                           const SimConfig& cfg, std::size_t trial = 0);

/// One path per trial, trials run in parallel.
std::vector<PairedOUPath> simulate_pairs(const ReactionNetwork& net, const MeasurementVector& M,
                                         const NoiseSpec& spec, const ReductionPlan& plan,
                                         const SimConfig& cfg);

/// Stationary MSE of MᵀU over stored samples with t ≥ burn_in. A positive
/// `relaxation` rate enables the horizon check (warning, not an error).
DeficiencyStats deficiency_stats(std::span<const PairedOUPath> paths, const MeasurementVector& M,
                                 double burn_in, double relaxation = 0.0);

/// Stationary variance of Y = MᵀX (mean known to be zero).
VarianceEstimate variance_estimate(std::span<const PairedOUPath> paths, const MeasurementVector& M,
                                   double burn_in);

/// Trial-averaged (MᵀU)² at every stored time point.
std::vector<double> mse_curve(std::span<const PairedOUPath> paths, const MeasurementVector& M);

struct MultiPlanResult {
  std::vector<DeficiencyStats> plans;  ///< same order as the input plans
  VarianceEstimate full_variance;
};

/// Streams one full path and one reduced path per plan through the same
/// increments and accumulates statistics without storing trajectories.
MultiPlanResult simulate_plans(const ReactionNetwork& net, const MeasurementVector& M,
                               const NoiseSpec& spec, std::span<const ReductionPlan> plans,
                               const SimConfig& cfg);

/// CSV t,X_0..,Xtilde_0..,Y,Y_tilde for one path.
void write_path_csv(std::ostream& os, const PairedOUPath& path);

}  // namespace stoshield
