#include "stoshield/validation.hpp"

#include "stoshield/channels.hpp"
#include "stoshield/edge_importance.hpp"
#include "stoshield/ensembles.hpp"
#include "stoshield/errors.hpp"
#include "stoshield/io.hpp"
#include "stoshield/ou_simulator.hpp"
#include "stoshield/population.hpp"
#include "stoshield/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>
#include <sstream>

namespace stoshield {

namespace {

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

struct Runner {
  std::vector<CheckResult> results;

  void check(const std::string& module, const std::string& invariant, const std::function<std::string(bool&)>& body) {
    CheckResult r{module, invariant, false, ""};
    try {
      bool ok = false;
      r.detail = body(ok);
      r.passed = ok;
    } catch (const std::exception& e) {
      r.passed = false;
      r.detail = std::string("exception: ") + e.what();
    }
    results.push_back(std::move(r));
  }
};

// Table 3, 0-based edge subsets of the 3-state chain.
const std::vector<std::pair<std::vector<std::size_t>, double>>& table3() {
  static const std::vector<std::pair<std::vector<std::size_t>, double>> t = {
      {{0}, 0.0417},          {{1}, 0.0417},          {{2}, 0.2917},          {{3}, 0.2917},
      {{0, 1}, 0.0833},       {{2, 3}, 0.5833},       {{0, 2}, 0.3333},       {{0, 3}, 0.3333},
      {{1, 2}, 0.3333},       {{1, 3}, 0.3333},       {{0, 1, 2}, 0.3750},    {{0, 1, 3}, 0.3750},
      {{0, 2, 3}, 0.6250},    {{1, 2, 3}, 0.6250}};
  return t;
}

void fast_checks(Runner& run, std::size_t threads) {
  const auto chain = three_state_chain();
  const auto pair = two_state_pair();

  run.check("reaction_graph", "laplacian-column-sums", [&](bool& ok) {
    double worst = 0.0;
    std::vector<ReactionNetwork> nets{chain.network, pair.network, build_channel(ChannelKind::K, -65).network,
                                      build_channel(ChannelKind::Na, -65).network};
    for (const auto& net : nets) worst = std::max(worst, build_laplacian(net).colwise().sum().cwiseAbs().maxCoeff());
    ok = worst <= 1e-12;
    return "max |1ᵀL| = " + fmt(worst);
  });

  run.check("reaction_graph", "stationary-kernel", [&](bool& ok) {
    double worst = 0.0;
    for (double V : {-100.0, -65.0, 0.0, 50.0})
      for (auto kind : {ChannelKind::K, ChannelKind::Na}) {
        const auto ch = build_channel(kind, V);
        const Vector pi = stationary_distribution(ch.network);
        worst = std::max(worst, (build_laplacian(ch.network) * pi).cwiseAbs().maxCoeff());
      }
    ok = worst <= 1e-12;
    return "max |Lπ| = " + fmt(worst);
  });

  run.check("spectral_core", "oracle-equivalence", [&](bool& ok) {
    double worst = 0.0;
    auto compare = [&](const ReactionNetwork& net, const NoiseSpec& spec) {
      const Matrix L = build_laplacian(net);
      const Matrix B = noise_matrix(net, spec);
      const auto eig = eigendecompose(L, net.has_symmetric_rates());
      const Matrix S = stationary_covariance_spectral(eig, B);
      const Matrix O = lyapunov_oracle(L, B);
      worst = std::max(worst, (S - O).norm() / std::max(O.norm(), 1e-300));
    };
    compare(chain.network, chain.noise);
    compare(pair.network, pair.noise);
    compare(build_channel(ChannelKind::K, -65).network, NoiseSpec::stationary_flux(1));
    for (std::size_t s = 0; s < 20; ++s) {
      ERConfig cfg{4 + s % 9, 0.5, 7, 1, 1};
      compare(sample_er(cfg, s).network, NoiseSpec::unit());
    }
    ok = worst <= 1e-7;
    return "max relative Frobenius error = " + fmt(worst);
  });

  run.check("spectral_core", "biorthogonality", [&](bool& ok) {
    double worst = 0.0;
    for (double V : {-100.0, -30.0, 40.0})
      for (auto kind : {ChannelKind::K, ChannelKind::Na}) {
        const Matrix L = build_laplacian(build_channel(kind, V).network);
        const auto d = diagnose(L, eigendecompose(L, false));
        worst = std::max({worst, d.biorthogonality, d.max_right_residual, d.max_left_residual});
      }
    ok = worst <= 1e-8;
    return "max residual / biorthogonality defect = " + fmt(worst);
  });

  run.check("edge_importance", "table3-analytic", [&](bool& ok) {
    const auto rep = edge_importance(chain.network, *chain.measurement, chain.noise);
    double worst = 0.0;
    for (const auto& [edges, expected] : table3())
      worst = std::max(worst, std::abs(total_deficiency(rep, make_plan(rep, edges)) - expected));
    ok = worst < 5e-5;
    return "max |Σ R − table| = " + fmt(worst);
  });

  run.check("edge_importance", "completeness", [&](bool& ok) {
    const auto rep = edge_importance(chain.network, *chain.measurement, chain.noise);
    const auto& M = chain.measurement->values();
    const Matrix S = lyapunov_oracle(build_laplacian(chain.network), noise_matrix(chain.network, chain.noise));
    const double full = M.dot(S * M);
    ok = rel_err(rep.values.sum(), full) <= 1e-8 && std::abs(full - 2.0 / 3.0) < 1e-12;
    return "Σ R_k = " + fmt(rep.values.sum()) + ", MᵀΣM = " + fmt(full);
  });

  run.check("channels_hh", "detailed-balance-pairing", [&](bool& ok) {
    const auto grid = voltage_grid(-100, 100, 10);
    double worst = 0.0;
    for (auto kind : {ChannelKind::K, ChannelKind::Na}) {
      const auto sweep = voltage_sweep_importance(kind, grid, 1.0, threads);
      for (Eigen::Index g = 0; g < sweep.importance.rows(); ++g)
        for (Eigen::Index k = 0; k + 1 < sweep.importance.cols(); k += 2)
          worst = std::max(worst, rel_err(sweep.importance(g, k), sweep.importance(g, k + 1)));
    }
    ok = worst <= 1e-6;
    return "max relative pair mismatch = " + fmt(worst);
  });

  run.check("channels_hh", "binomial-law", [&](bool& ok) {
    double worst = 0.0;
    for (double V = -100; V <= 100; V += 5) {
      worst = std::max(worst, (stationary_distribution(build_channel(ChannelKind::K, V).network) -
                               potassium_closed_form(V)).cwiseAbs().maxCoeff());
      worst = std::max(worst, (stationary_distribution(build_channel(ChannelKind::Na, V).network) -
                               sodium_closed_form(V)).cwiseAbs().maxCoeff());
    }
    ok = worst <= 1e-10;
    return "max |π − closed form| = " + fmt(worst);
  });

  run.check("ou_simulator", "empty-plan-coupling", [&](bool& ok) {
    SimConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_final = 5;
    const auto path = simulate_pair(chain.network, *chain.measurement, chain.noise, ReductionPlan{}, cfg);
    double worst = 0.0;
    for (const auto& u : path.U) worst = std::max(worst, u.cwiseAbs().maxCoeff());
    ok = worst == 0.0;
    return "max |U| = " + fmt(worst);
  });

  run.check("ou_simulator", "mass-conservation", [&](bool& ok) {
    SimConfig cfg;
    cfg.t_final = 5;
    const auto path = simulate_pair(chain.network, *chain.measurement, chain.noise, ReductionPlan{{0, 1}, 0}, cfg);
    double worst = 0.0;
    for (std::size_t t = 0; t < path.X.size(); ++t)
      worst = std::max({worst, std::abs(path.X[t].sum()), std::abs(path.X_tilde[t].sum())});
    ok = worst <= 1e-8;
    return "max |1ᵀX| = " + fmt(worst);
  });

  run.check("population_simulator", "ssa-conservation", [&](bool& ok) {
    PopulationOptions opt;
    opt.t_final = 20;
    opt.record_stride = 1;
    const auto r = ssa_exact(chain.network, PopulationState::stationary_start(chain.network, 300), opt);
    bool exact = true;
    for (const auto& s : r.states) exact = exact && s.sum() == 300.0;
    ok = exact && r.steps > 0;
    return std::to_string(r.steps) + " events, exact total " + (exact ? "kept" : "broken");
  });

  run.check("population_simulator", "shielded-mass-conservation", [&](bool& ok) {
    PopulationOptions opt;
    opt.t_final = 20;
    opt.record_stride = 1;
    const ShieldingMask mask{{0, 1}};
    const auto a = tau_leap(chain.network, PopulationState::stationary_start(chain.network, 1000), 0.01, opt, mask);
    const auto b = discrete_multinomial(chain.network, PopulationState::stationary_start(chain.network, 1000), 0.01,
                                        opt, mask);
    const double worst = std::max(a.max_conservation_error, b.max_conservation_error);
    ok = worst <= 1e-9 * 1000;
    return "max |ΣN − N_tot| = " + fmt(worst);
  });

  run.check("cli_io", "schema-rejects-nonpositive-rate", [&](bool& ok) {
    try {
      parse_network(R"({"nodes":2,"edges":[{"from":0,"to":1,"rate":1},{"from":1,"to":0,"rate":-1}]})");
    } catch (const SchemaError& e) {
      ok = std::string(e.field()) == "/edges/1/rate";
      return std::string("rejected: ") + e.what();
    }
    ok = false;
    return std::string("corrupted fixture was accepted");
  });
}

void full_checks(Runner& run, std::size_t threads) {
  const auto chain = three_state_chain();

  run.check("ou_simulator", "table3-monte-carlo", [&](bool& ok) {
    SimConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_final = 2000;
    cfg.burn_in = 20;
    cfg.trials = 10;
    cfg.seed = 20261014;
    cfg.threads = threads;
    const auto rep = edge_importance(chain.network, *chain.measurement, chain.noise);
    std::vector<ReductionPlan> plans;
    for (const auto& [edges, _] : table3()) plans.push_back(make_plan(rep, edges));
    const auto res = simulate_plans(chain.network, *chain.measurement, chain.noise, plans, cfg);
    std::size_t bad = 0;
    double worst = 0.0;
    for (std::size_t i = 0; i < plans.size(); ++i) {
      const double z = std::abs(res.plans[i].empirical_mse - plans[i].predicted_error) / res.plans[i].std_error;
      worst = std::max(worst, z);
      if (z > 3.0) ++bad;
    }
    ok = bad == 0;
    return std::to_string(bad) + " of 14 plans outside 3 stderr, max |z| = " + fmt(worst);
  });

  run.check("ensembles", "moment-scaling", [&](bool& ok) {
    const auto sc = moment_scaling({10, 30, 100, 300}, 0.5, 11, 10, threads);
    ok = sc.q_fit >= 1.4 && sc.q_fit <= 1.9;
    return "q = " + fmt(sc.q_fit);
  });

  run.check("ensembles", "s-statistic", [&](bool& ok) {
    const auto rows = s_sweep({0.3, 0.5, 0.7, 0.9}, {400}, 10, 13, threads);
    double worst = 0.0;
    for (const auto& r : rows) worst = std::max(worst, std::abs(r.scaled - 1.0));
    ok = worst <= 0.15;
    return "max |S·2pn − 1| at n=400 = " + fmt(worst);
  });

  run.check("ensembles", "cluster-gap", [&](bool& ok) {
    ERConfig cfg{50, 0.5, 17, 10, threads};
    const auto ex = rk_cluster_experiment(cfg, 25);
    const double bound = 2.0 * std::sqrt(2.0) * std::pow(50.0, -5.0 / 3.0);
    ok = std::abs(ex.important_mean - 0.02) <= 0.25 * 0.02 && ex.averaged_unimportant_max <= bound &&
         ex.averaged_gap_ratio >= 3.0;
    return "important mean " + fmt(ex.important_mean) + ", averaged-curve unimportant max " +
           fmt(ex.averaged_unimportant_max) + " (bound " + fmt(bound) + "), averaged gap " +
           fmt(ex.averaged_gap_ratio) + "; single-sample extremes: max " + fmt(ex.unimportant_max) + ", gap " +
           fmt(ex.gap_ratio_min);
  });

  run.check("ensembles", "graded-fit", [&](bool& ok) {
    const auto ex = graded_experiment(ERConfig{50, 0.5, 19, 10, threads});
    ok = std::abs(ex.a_fit - 0.02) <= 0.25 * 0.02;
    return "a = " + fmt(ex.a_fit);
  });

  run.check("channels_hh", "sodium-switch", [&](bool& ok) {
    const auto grid = voltage_grid(-100, 100, 1);
    const auto sweep = voltage_sweep_importance(ChannelKind::Na, grid, 1.0, threads);
    const auto v = crossing_voltage(grid, sweep.importance, 5, 9);
    ok = v && *v >= -35 && *v <= -15;
    return v ? "switch at " + fmt(*v) + " mV" : std::string("no switch found");
  });

  run.check("population_simulator", "ssa-stationary-mean", [&](bool& ok) {
    std::vector<PopulationRun> runs;
    for (std::size_t t = 0; t < 8; ++t) {
      PopulationOptions opt;
      opt.t_final = 500;
      opt.burn_in = 10;
      opt.trial = t;
      runs.push_back(ssa_exact(chain.network, PopulationState::stationary_start(chain.network, 300), opt));
    }
    const auto s = summarize_runs(runs);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < 3; ++i) worst = std::max(worst, std::abs(s.mean[i] - 100.0) / s.std_error[i]);
    ok = worst <= 3.0;
    return "max |z| = " + fmt(worst);
  });
}

}  // namespace

Suite parse_suite(const std::string& name) {
  if (name == "fast") return Suite::Fast;
  if (name == "full") return Suite::Full;
  throw SchemaError("suite must be 'fast' or 'full'", "/suite");
}

std::vector<CheckResult> run_suite(Suite suite, std::size_t threads) {
  Runner run;
  fast_checks(run, threads);
  if (suite == Suite::Full) full_checks(run, threads);
  return run.results;
}

bool print_report(std::ostream& os, const std::vector<CheckResult>& results) {
  std::size_t failed = 0;
  for (const auto& r : results) {
    os << (r.passed ? "PASS " : "FAIL ") << r.module << '/' << r.invariant << ": " << r.detail << '\n';
    if (!r.passed) ++failed;
  }
  os << results.size() - failed << '/' << results.size() << " checks passed\n";
  return failed == 0;
}

}  // namespace stoshield
