#pragma once

#include "stoshield/edge_importance.hpp"
#include "stoshield/reaction_graph.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace stoshield {

enum class ChannelKind { K, Na };

ChannelKind parse_channel_kind(const std::string& name);
const char* to_string(ChannelKind kind) noexcept;

/// Hodgkin–Huxley gating rates (1/ms) at membrane voltage V (mV).
struct RateSet {
  double V = 0.0;
  double alpha_n = 0.0, beta_n = 0.0;
  double alpha_m = 0.0, beta_m = 0.0;
  double alpha_h = 0.0, beta_h = 0.0;
};

RateSet rates(double V);

/// Voltage-clamped channel as a reaction network.
///
/// K: states 0..4 count open n-gates, conducting state 4. Edges in order
/// 0→1 (4α_n), 1→0 (β_n), 1→2 (3α_n), 2→1 (2β_n), 2→3 (2α_n), 3→2 (3β_n),
/// 3→4 (α_n), 4→3 (4β_n).
///
/// Na: state s + 4h has s open m-gates and h open h-gates, conducting state 7.
/// Edges 0..5 are the m-chain of h = 0 as s→s+1, s+1→s for s = 0, 1, 2 with
/// rates (3−s)α_m and (s+1)β_m; edges 6..11 repeat this for h = 1; edges
/// 12..19 are s→s+4 (α_h) then s+4→s (β_h) for s = 0..3. Edges 10/11 join
/// 6↔7 and 18/19 join 3↔7.
struct ChannelModel {
  ChannelKind kind;
  double V;
  ReactionNetwork network;
  MeasurementVector M;
  double V_rev;
  double g_unit = 1.0;
  NoiseSpec noise;
  /// Forward/backward edge pairs (2k, 2k+1).
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
};

ChannelModel build_channel(ChannelKind kind, double V, double n_tot = 1.0);

/// V_min, V_min + dV, ... up to V_max (inclusive within dV/1000).
std::vector<double> voltage_grid(double v_min, double v_max, double dv);

struct VoltageSweep {
  ChannelKind kind;
  std::vector<double> voltages;
  Matrix importance;  ///< grid × m, R_k(V)
  Matrix current;     ///< grid × m, R_k(V)·(V − V_rev)²
  Matrix occupancy;   ///< grid × n, π(V)
  double max_imag_eigenvalue = 0.0;
};

/// Builds the channel at each voltage, decomposes L(V) (general solver) and
/// evaluates R_k with stationary-flux noise. DefectiveMatrix errors name V.
VoltageSweep voltage_sweep_importance(ChannelKind kind, const std::vector<double>& grid, double n_tot,
                                      std::size_t threads = 0);

/// R_k(V)·(V − V_rev)² with g° = 1.
Matrix current_variance(ChannelKind kind, const std::vector<double>& grid, const Matrix& importance);

/// π(V) per state, grid × n.
Matrix occupancy_curves(ChannelKind kind, const std::vector<double>& grid);

/// Binom(4, α_n/(α_n+β_n)) over open-gate counts.
Vector potassium_closed_form(double V);
/// Binom(3, α_m/(α_m+β_m)) ⊗ Bernoulli(α_h/(α_h+β_h)) in the state numbering above.
Vector sodium_closed_form(double V);

/// Index of the pair (k/2) holding the largest value of one sweep row.
std::size_t dominant_pair(const Eigen::Ref<const Vector>& row);

/// Per grid point dominant pair.
std::vector<std::size_t> dominant_pairs(const Matrix& curves);

/// First voltage where the dominant pair turns from `from` into `to`,
/// linearly interpolated on the difference of the two pair curves.
std::optional<double> crossing_voltage(const std::vector<double>& grid, const Matrix& curves,
                                       std::size_t from, std::size_t to);

void write_sweep_csv(std::ostream& os, const ReactionNetwork& reference, const VoltageSweep& sweep);
void write_occupancy_csv(std::ostream& os, const VoltageSweep& sweep);

}  // namespace stoshield
