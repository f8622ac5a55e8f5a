// Acceptance checks 1-10. Each prints one [PASS]/[FAIL] line.

#include "stoshield/channels.hpp"
#include "stoshield/edge_importance.hpp"
#include "stoshield/ensembles.hpp"
#include "stoshield/io.hpp"
#include "stoshield/ou_simulator.hpp"
#include "stoshield/population.hpp"
#include "stoshield/random.hpp"
#include "stoshield/spectral.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>

using namespace stoshield;

namespace {

constexpr std::uint64_t kSeed = 20261014;

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Outcome {
  bool pass;
  std::string detail;
};

// Table 3 rows with 0-based edges.
const std::vector<std::pair<std::vector<std::size_t>, double>> kTable3 = {
    {{0}, 0.0417},       {{1}, 0.0417},       {{2}, 0.2917},       {{3}, 0.2917},       {{0, 1}, 0.0833},
    {{2, 3}, 0.5833},    {{0, 2}, 0.3333},    {{0, 3}, 0.3333},    {{1, 2}, 0.3333},    {{1, 3}, 0.3333},
    {{0, 1, 2}, 0.3750}, {{0, 1, 3}, 0.3750}, {{0, 2, 3}, 0.6250}, {{1, 2, 3}, 0.6250}};

// LΣ + ΣLᵀ + BBᵀ = 0 with 1ᵀΣ = 0, as one stacked least-squares system.
Matrix kronecker_lyapunov(const Matrix& L, const Matrix& B) {
  const Eigen::Index n = L.rows();
  const Matrix I = Matrix::Identity(n, n);
  Matrix K = Matrix::Zero(n * n + n, n * n);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b) {
      // vec(LΣ) = (I ⊗ L) vecΣ, vec(ΣLᵀ) = (L ⊗ I) vecΣ.
      K.block(a * n, b * n, n, n) += I(a, b) * L + L(a, b) * I;
    }
  for (Eigen::Index c = 0; c < n; ++c) K.block(n * n + c, c * n, 1, n).setOnes();
  Vector rhs = Vector::Zero(n * n + n);
  const Matrix Q = B * B.transpose();
  rhs.head(n * n) = -Eigen::Map<const Vector>(Q.data(), n * n);
  const Vector s = K.colPivHouseholderQr().solve(rhs);
  Matrix S = Eigen::Map<const Matrix>(s.data(), n, n);
  return 0.5 * (S + S.transpose());
}

double binom(int n, int k, double p) {
  double c = 1;
  for (int i = 0; i < k; ++i) c = c * (n - i) / (i + 1);
  return c * std::pow(p, k) * std::pow(1 - p, n - k);
}

Outcome criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto chain = three_state_chain();
  const auto rep = edge_importance(chain.network, *chain.measurement, chain.noise);
  bool ok = true;
  double worst = 0;
  for (const auto& [edges, value] : kTable3) {
    const double got = make_plan(rep, edges).predicted_error;
    ok = ok && std::round(got * 1e4) / 1e4 == value;
    worst = std::max(worst, std::abs(got - value));
  }
  const double t = seconds_since(t0);
  ok = ok && t < 1.0;
  std::ostringstream os;
  os << "R = (" << fmt(rep.values[0]) << ", " << fmt(rep.values[1]) << ", " << fmt(rep.values[2]) << ", "
     << fmt(rep.values[3]) << "); 14 subset sums, max |diff| " << fmt(worst) << " before rounding; " << fmt(t)
     << " s";
  return {ok, os.str()};
}

Outcome criterion2() {
  const auto chain = three_state_chain();
  const auto rep = edge_importance(chain.network, *chain.measurement, chain.noise);
  SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.t_final = 2000;
  cfg.burn_in = 20;
  cfg.trials = 10;
  cfg.seed = kSeed;
  std::vector<ReductionPlan> plans;
  for (const auto& [edges, _] : kTable3) plans.push_back(make_plan(rep, edges));
  const auto res = simulate_plans(chain.network, *chain.measurement, chain.noise, plans, cfg);
  std::size_t inside = 0;
  double worst = 0;
  for (std::size_t i = 0; i < plans.size(); ++i) {
    const double z = std::abs(res.plans[i].empirical_mse - kTable3[i].second) / res.plans[i].std_error;
    worst = std::max(worst, z);
    if (z <= 3.0) ++inside;
  }
  // Two-edge plans are rows 4..9; {0,1} is row 4.
  std::size_t best = 4;
  for (std::size_t i = 4; i < 10; ++i)
    if (res.plans[i].empirical_mse < res.plans[best].empirical_mse) best = i;
  const bool ok = inside == plans.size() && best == 4;
  return {ok, std::to_string(inside) + "/14 plans within 3 stderr (max |z| " + fmt(worst) +
                  "); smallest two-edge MSE " + fmt(res.plans[best].empirical_mse) + " for edges {" +
                  std::to_string(kTable3[best].first[0]) + "," + std::to_string(kTable3[best].first[1]) +
                  "}; seed " + std::to_string(kSeed)};
}

Outcome criterion3() {
  std::mt19937_64 rng(kSeed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double cov_worst = 0, sum_worst = 0;
  for (std::size_t s = 0; s < 100; ++s) {
    const std::size_t n = 3 + s % 18;
    const double p = 0.3 + 0.6 * u(rng);
    const auto net = sample_er(ERConfig{n, p, kSeed, 1, 1}, s).network;
    const Matrix L = build_laplacian(net);
    const Matrix B = noise_matrix(net, NoiseSpec::unit());
    const Matrix O = kronecker_lyapunov(L, B);
    const auto eig = eigendecompose(L, s % 2 == 0);
    const Matrix S = stationary_covariance_spectral(eig, B);
    cov_worst = std::max(cov_worst, (S - O).cwiseAbs().maxCoeff() / O.cwiseAbs().maxCoeff());
    Vector m(static_cast<Eigen::Index>(n));
    for (auto& x : m) x = u(rng);
    const MeasurementVector M(m);
    const auto rep = edge_importance(net, eig, M, NoiseSpec::unit());
    const double total = m.dot(O * m);
    sum_worst = std::max(sum_worst, std::abs(rep.values.sum() - total) / std::abs(total));
  }
  return {cov_worst <= 1e-7 && sum_worst <= 1e-8,
          "100 ER networks n in [3, 20]: max relative covariance error " + fmt(cov_worst) +
              ", max relative |sum R_k - M'SM| " + fmt(sum_worst)};
}

Outcome criterion4() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto ex = rk_cluster_experiment(ERConfig{50, 0.5, kSeed, 10, 0}, 25);
  const double bound = 2.0 * std::sqrt(2.0) * std::pow(50.0, -5.0 / 3.0);
  const double t = seconds_since(t0);
  // Both the rank curve averaged over samples and every single sample.
  const bool averaged = ex.averaged_unimportant_max <= bound && ex.averaged_gap_ratio >= 3.0;
  const bool strict = ex.unimportant_max <= bound && ex.gap_ratio_min >= 3.0;
  const bool ok = std::abs(ex.important_mean - 0.02) <= 0.25 * 0.02 && averaged && strict && t <= 60.0;
  return {ok, "important mean " + fmt(ex.important_mean) + "; sample-averaged rank curve: unimportant max " +
                  fmt(ex.averaged_unimportant_max) + " (bound " + fmt(bound) + "), gap " +
                  fmt(ex.averaged_gap_ratio) + "; single-sample extremes: unimportant max " +
                  fmt(ex.unimportant_max) + ", min gap " + fmt(ex.gap_ratio_min) + "; " + fmt(t) + " s"};
}

Outcome criterion5() {
  const auto rows = s_sweep({0.3, 0.5, 0.7, 0.9}, {50, 100, 200, 400}, 10, kSeed, 0);
  double worst = 0;
  std::string detail = "S*2pn at n=400:";
  for (const auto& r : rows)
    if (r.n == 400) {
      worst = std::max(worst, std::abs(r.scaled - 1.0));
      detail += " p=" + fmt(r.p) + ": " + fmt(r.scaled);
    }
  return {worst <= 0.15, detail + "; max |S*2pn - 1| " + fmt(worst)};
}

Outcome criterion6() {
  const auto sc = moment_scaling({10, 30, 100, 300}, 0.5, kSeed, 10, 0);
  bool ok = sc.q_fit >= 1.4 && sc.q_fit <= 1.9;
  double cross = 0, ratio_lo = 1e300, ratio_hi = 0;
  for (const auto& r : sc.rows) {
    cross = std::max(cross, r.e_cross_ij);
    const double ratio = r.e_sq_sq * double(r.n) * double(r.n);
    ratio_lo = std::min(ratio_lo, ratio);
    ratio_hi = std::max(ratio_hi, ratio);
  }
  ok = ok && cross < 1e-10 && ratio_lo >= 1.0 / 3.0 && ratio_hi <= 3.0;
  return {ok, "q = " + fmt(sc.q_fit) + "; max |E[v_i v_j]| " + fmt(cross) + "; n^2 E[v^2 v'^2] in [" +
                  fmt(ratio_lo) + ", " + fmt(ratio_hi) + "]"};
}

double pairing_error(const Matrix& R) {
  double worst = 0;
  for (Eigen::Index g = 0; g < R.rows(); ++g) {
    const double scale = R.row(g).cwiseAbs().maxCoeff();
    for (Eigen::Index k = 0; k + 1 < R.cols(); k += 2)
      worst = std::max(worst, std::abs(R(g, k) - R(g, k + 1)) / scale);
  }
  return worst;
}

Outcome criterion7() {
  const auto grid = voltage_grid(-100, 100, 1);
  const auto sw = voltage_sweep_importance(ChannelKind::K, grid, 1.0, 0);
  const double pair = pairing_error(sw.importance);
  double margin = 1e300, law = 0;
  for (Eigen::Index g = 0; g < sw.importance.rows(); ++g) {
    const auto row = sw.importance.row(g);
    double other = 0;
    for (Eigen::Index k = 0; k < row.size(); ++k)
      if (k != 6 && k != 7) other = std::max(other, row[k]);
    margin = std::min(margin, row[6] / other);
    const auto r = rates(grid[static_cast<std::size_t>(g)]);
    const double p = r.alpha_n / (r.alpha_n + r.beta_n);
    for (int s = 0; s < 5; ++s) law = std::max(law, std::abs(sw.occupancy(g, s) - binom(4, s, p)));
  }
  return {pair <= 1e-6 && margin > 1.0 && law <= 1e-10,
          "pairing " + fmt(pair) + "; min R_6 / max other pair " + fmt(margin) + " over 201 voltages; binomial law " +
              fmt(law)};
}

Outcome criterion8() {
  const auto grid = voltage_grid(-100, 100, 1);
  const auto sw = voltage_sweep_importance(ChannelKind::Na, grid, 1.0, 0);
  const double pair = pairing_error(sw.importance);
  const auto v = crossing_voltage(grid, sw.importance, 5, 9);
  const auto cur = current_variance(ChannelKind::Na, grid, sw.importance);
  const auto vc = crossing_voltage(grid, cur, 5, 9);
  const bool ok = pair <= 1e-6 && v && *v >= -35.0 && *v <= -15.0 && vc && std::abs(*vc - *v) <= 1.0;
  return {ok, "pairing " + fmt(pair) + "; importance switch (edges 10/11 -> 18/19) at " +
                  (v ? fmt(*v) : std::string("none")) + " mV; current-variance switch at " +
                  (vc ? fmt(*vc) : std::string("none")) + " mV"};
}

Outcome criterion9() {
  const auto ex = graded_experiment(ERConfig{50, 0.5, kSeed, 10, 0});
  return {std::abs(ex.a_fit - 0.02) <= 0.25 * 0.02, "a = " + fmt(ex.a_fit) + " (1/50 = 0.02)"};
}

Outcome criterion10() {
  const auto chain = three_state_chain();
  const auto& net = chain.network;
  std::ostringstream os;
  bool ok = true;

  // SSA conservation and stationary mean.
  std::vector<PopulationRun> runs;
  double drift = 0;
  for (std::size_t t = 0; t < 8; ++t) {
    PopulationOptions opt;
    opt.t_final = 500;
    opt.burn_in = 10;
    opt.seed = kSeed;
    opt.trial = t;
    opt.record_stride = t == 0 ? 1 : 0;
    runs.push_back(ssa_exact(net, PopulationState::stationary_start(net, 300), opt));
    for (const auto& s : runs.back().states) drift = std::max(drift, std::abs(s.sum() - 300.0));
    drift = std::max(drift, std::abs(runs.back().final_state.total() - 300.0));
  }
  const auto occ = summarize_runs(runs);
  double zmax = 0;
  for (Eigen::Index i = 0; i < 3; ++i) zmax = std::max(zmax, std::abs(occ.mean[i] - 100.0) / occ.std_error[i]);
  ok = ok && drift == 0.0 && zmax <= 3.0;
  os << "SSA max |sum N - 300| = " << fmt(drift) << ", mean max |z| " << fmt(zmax);

  // Single-step multinomial moments at N = (100, 100, 100), h = 0.1.
  const double h = 0.1, Ni = 100;
  const MultinomialStepper step(net, h);
  const Vector N = Vector::Constant(3, Ni);
  std::vector<KeyedStream> streams;
  for (std::size_t k = 0; k < 4; ++k) streams.emplace_back(kSeed, 10, 0, k);
  const double mean = Ni * h, V = Ni * h * (1 - h), cross = Ni * h * h;
  // Targets: Var Δ1, Var Δ2, Var Δ3, Cov(Δ1,Δ2), Cov(Δ1,Δ3), Cov(Δ2,Δ3), Cov(N21,N23).
  const double target[7] = {2 * V, 4 * V - 2 * cross, 2 * V, -2 * V + cross, -cross, -2 * V + cross, -cross};
  double sum[7] = {}, sq[7] = {};
  const std::size_t draws = 1000000;
  std::vector<double> u(4);
  for (std::size_t d = 0; d < draws; ++d) {
    for (std::size_t k = 0; k < 4; ++k) u[k] = streams[k].uniform();
    const Vector f = step.flows(N, u).array() - mean;
    const double d1 = -f[0] + f[1], d2 = f[0] - f[1] - f[2] + f[3], d3 = f[2] - f[3];
    const double x[7] = {d1 * d1, d2 * d2, d3 * d3, d1 * d2, d1 * d3, d2 * d3, f[1] * f[2]};
    for (int i = 0; i < 7; ++i) {
      sum[i] += x[i];
      sq[i] += x[i] * x[i];
    }
  }
  double zmom = 0;
  for (int i = 0; i < 7; ++i) {
    const double m = sum[i] / draws;
    const double se = std::sqrt((sq[i] / draws - m * m) / (draws - 1));
    zmom = std::max(zmom, std::abs(m - target[i]) / se);
  }
  ok = ok && zmom <= 3.0;
  os << "; single-step moments max |z| " << fmt(zmom) << " over 7 formulas";

  // Paired shielding error for edges {0,1} at N_tot = 1e4.
  PopulationConfig cfg;
  cfg.method = PopulationMethod::TauLeap;
  cfg.step = 0.01;
  cfg.t_final = 1000;
  cfg.burn_in = 20;
  cfg.trials = 8;
  cfg.seed = kSeed;
  const double n_tot = 1e4;
  const auto err = population_shielding_error(net, *chain.measurement, 10000, ShieldingMask{{0, 1}}, cfg);
  const auto rep = edge_importance(net, *chain.measurement, NoiseSpec::stationary_flux(n_tot));
  const double predicted = rep.values[0] + rep.values[1];
  ok = ok && err.valid && std::abs(err.variance - predicted) <= 0.10 * predicted;
  os << "; shielded error at N=1e4: " << fmt(err.variance) << " +/- " << fmt(err.std_error)
     << " vs stationary-flux R_0+R_1 = N/3 * 0.0833 = " << fmt(predicted) << " (N*0.0833 = " << fmt(n_tot * 0.0833)
     << " assumes unit per-edge flux per individual)";
  return {ok, os.str()};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  int only = 0;
  app.add_option("--criterion", only, "run one criterion (1-10); default all")->check(CLI::Range(0, 10));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::function<Outcome()>> all = {criterion1, criterion2, criterion3, criterion4, criterion5,
                                                     criterion6, criterion7, criterion8, criterion9, criterion10};
  bool ok = true;
  for (int c = 1; c <= 10; ++c) {
    if (only != 0 && c != only) continue;
    Outcome r{false, ""};
    try {
      r = all[static_cast<std::size_t>(c - 1)]();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (r.pass ? "[PASS]" : "[FAIL]") << " criterion " << c << ": " << r.detail << std::endl;
    ok = ok && r.pass;
  }
  return ok ? 0 : 1;
}
