#include "stoshield/cli.hpp"

#include "stoshield/channels.hpp"
#include "stoshield/csv.hpp"
#include "stoshield/edge_importance.hpp"
#include "stoshield/ensembles.hpp"
#include "stoshield/errors.hpp"
#include "stoshield/io.hpp"
#include "stoshield/ou_simulator.hpp"
#include "stoshield/parallel.hpp"
#include "stoshield/population.hpp"
#include "stoshield/validation.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <optional>
#include <ostream>
#include <sstream>

namespace stoshield {

using nlohmann::ordered_json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitSampling = 4;
constexpr int kExitValidation = 5;

ordered_json to_array(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

// Keeps files and the manifest together; data files are written in call order.
class Output {
 public:
  Output(std::string dir, std::string command, std::uint64_t seed)
      : dir_(std::move(dir)), start_(std::chrono::steady_clock::now()) {
    manifest_.command = std::move(command);
    manifest_.seed = seed;
  }
  ordered_json& config() { return manifest_.config; }
  void write(const std::string& name, const std::string& text) { write_output(dir_, name, text, manifest_); }
  void json(const std::string& name, const ordered_json& j) { write(name, j.dump(2) + "\n"); }
  void finish() {
    manifest_.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    write_manifest(dir_, manifest_);
  }

 private:
  std::string dir_;
  RunManifest manifest_;
  std::chrono::steady_clock::time_point start_;
};

std::string joined(const std::vector<std::string>& args) {
  std::string s = "stoshield";
  for (const auto& a : args) s += " " + a;
  return s;
}

MeasurementVector pick_measurement(const NetworkFile& file, const std::string& flag) {
  if (!flag.empty()) {
    const auto v = parse_real_list(flag, "/measurement");
    if (v.size() != file.network.node_count())
      throw SchemaError("measurement length must equal node count", "/measurement");
    return MeasurementVector(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
  }
  if (!file.measurement) throw SchemaError("no measurement in the network file; pass --measurement", "/measurement");
  return *file.measurement;
}

struct ImportanceArgs {
  std::string network, measurement, out = "stoshield-out";
  std::size_t budget = 0;
};

void cmd_importance(const ImportanceArgs& a, const std::string& command, std::ostream& os) {
  const auto file = load_network(a.network);
  const auto M = pick_measurement(file, a.measurement);
  const auto rep = edge_importance(file.network, M, file.noise);
  const auto plan = optimal_reduction(rep, a.budget);

  Output out(a.out, command, 0);
  out.config() = {{"network", a.network}, {"measurement", to_array(M.values())}, {"noise", to_string(file.noise.mode)},
                  {"budget", a.budget}};
  std::ostringstream csv;
  write_importance_csv(csv, file.network, rep);
  out.write("importance.csv", csv.str());
  const ordered_json summary{{"ranking", rep.ranking},
                             {"budget", a.budget},
                             {"plan", {{"neglected", plan.neglected}, {"predicted_error", plan.predicted_error}}},
                             {"full_variance", rep.values.sum()}};
  out.json("plan.json", summary);
  out.finish();
  os << csv.str() << summary.dump(2) << '\n';
}

struct SimulateArgs {
  std::string network, measurement, mode = "ou", plan, mask, out = "stoshield-out";
  double dt = 1e-3, tau = 1e-2, h = 1e-2, t_final = 100.0, burn_in = -1.0;
  std::size_t trials = 4, stride = 0;
  std::uint64_t seed = 1, ntot = 1000;
};

void cmd_simulate(const SimulateArgs& a, const std::string& command, std::ostream& os) {
  const auto file = load_network(a.network);
  const auto M = pick_measurement(file, a.measurement);
  if (!a.plan.empty() && !a.mask.empty() && a.plan != a.mask)
    throw SchemaError("--plan and --mask name the same edge set; give one of them", "/plan");
  const auto edges = parse_index_list(a.plan.empty() ? a.mask : a.plan, "/plan");
  for (auto k : edges)
    if (k >= file.network.edge_count())
      throw IndexError("edge " + std::to_string(k) + " out of range (network has " +
                       std::to_string(file.network.edge_count()) + " edges)");

  Output out(a.out, command, a.seed);
  ordered_json stats;
  if (a.mode == "ou") {
    const auto eig = eigendecompose(build_laplacian(file.network), file.network.has_symmetric_rates());
    const auto rep = edge_importance(file.network, eig, M, file.noise);
    const auto plan = make_plan(rep, edges);
    SimConfig cfg;
    cfg.dt = a.dt;
    cfg.t_final = a.t_final;
    cfg.burn_in = a.burn_in >= 0.0 ? a.burn_in : std::min(0.1 * a.t_final, 20.0 / relaxation_rate(eig));
    cfg.seed = a.seed;
    cfg.trials = a.trials;
    cfg.record_stride = std::max<std::size_t>(a.stride, 1);
    out.config() = {{"network", a.network}, {"mode", a.mode},        {"plan", plan.neglected},
                    {"dt", cfg.dt},         {"t_final", cfg.t_final}, {"burn_in", cfg.burn_in},
                    {"trials", cfg.trials}, {"seed", cfg.seed},       {"stride", a.stride}};
    const std::vector<ReductionPlan> plans{plan};
    const auto res = simulate_plans(file.network, M, file.noise, plans, cfg);
    const auto& d = res.plans.front();
    stats = {{"mode", "ou"},
             {"plan", plan.neglected},
             {"predicted", plan.predicted_error},
             {"empirical", d.empirical_mse},
             {"stderr", d.std_error},
             {"mean_deficiency", d.mean_deficiency},
             {"mean_deficiency_stderr", d.mean_std_error},
             {"full_variance",
              {{"predicted", rep.values.sum()},
               {"empirical", res.full_variance.value},
               {"stderr", res.full_variance.std_error}}},
             {"warning", d.warning ? ordered_json(d.warning->message) : ordered_json(nullptr)}};
    if (d.warning) os << "warning: " << d.warning->message << '\n';
    if (a.stride > 0) {
      std::ostringstream csv;
      write_path_csv(csv, simulate_pair(file.network, M, file.noise, plan, cfg, 0));
      out.write("trajectory.csv", csv.str());
    }
  } else {
    const auto method = parse_population_method(a.mode);
    const double n_tot = static_cast<double>(a.ntot);
    const auto flux = NoiseSpec::stationary_flux(n_tot);
    const auto rep = edge_importance(file.network, M, flux);
    const Vector pi = stationary_distribution(file.network);
    const double mean_pred = n_tot * M.values().dot(pi);
    const double burn = a.burn_in >= 0.0 ? a.burn_in : 0.1 * a.t_final;
    const ShieldingMask mask{edges};
    out.config() = {{"network", a.network}, {"mode", a.mode},     {"mask", edges},     {"ntot", a.ntot},
                    {"t_final", a.t_final}, {"burn_in", burn},    {"trials", a.trials}, {"seed", a.seed},
                    {"stride", a.stride}};
    if (method == PopulationMethod::Ssa) {
      if (!edges.empty()) throw SchemaError("ssa is exact and cannot shield edges; use tauleap or multinomial", "/mask");
      const auto start = PopulationState::stationary_start(file.network, a.ntot);
      const auto runs = parallel_map(a.trials, [&](std::size_t t) {
        PopulationOptions opt;
        opt.t_final = a.t_final;
        opt.burn_in = burn;
        opt.seed = a.seed;
        opt.trial = t;
        opt.record_stride = t == 0 ? a.stride : 0;
        return ssa_exact(file.network, start, opt);
      });
      const auto summary = summarize_runs(runs);
      std::vector<double> ym, yv;
      std::size_t events = 0;
      for (const auto& r : runs) {
        ym.push_back(M.values().dot(r.time_mean));
        yv.push_back(M.values().dot(r.time_cov * M.values()));
        events += r.steps;
      }
      auto mean_se = [](const std::vector<double>& v) {
        const double n = static_cast<double>(v.size());
        double m = 0.0, ss = 0.0;
        for (double x : v) m += x / n;
        for (double x : v) ss += (x - m) * (x - m);
        return std::pair{m, v.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0};
      };
      auto [mm, mse] = mean_se(ym);
      if (runs.size() == 1) {
        std::vector<double> batches;
        for (const auto& b : runs.front().batch_means) batches.push_back(M.values().dot(b));
        mse = mean_se(batches).second;
      }
      const auto [vm, vse] = mean_se(yv);
      stats = {{"mode", "ssa"},
               {"ntot", a.ntot},
               {"events", events},
               {"occupancy",
                {{"predicted", to_array(n_tot * pi)},
                 {"empirical", to_array(summary.mean)},
                 {"stderr", to_array(summary.std_error)}}},
               {"measurement_mean", {{"predicted", mean_pred}, {"empirical", mm}, {"stderr", mse}}},
               {"measurement_variance",
                {{"predicted", rep.values.sum()}, {"empirical", vm}, {"stderr", vse}}}};
      if (a.stride > 0) {
        std::ostringstream csv;
        write_population_csv(csv, runs.front());
        out.write("trajectory.csv", csv.str());
      }
    } else {
      PopulationConfig cfg;
      cfg.method = method;
      cfg.step = method == PopulationMethod::TauLeap ? a.tau : a.h;
      cfg.t_final = a.t_final;
      cfg.burn_in = burn;
      cfg.seed = a.seed;
      cfg.trials = a.trials;
      out.config()["step"] = cfg.step;
      const auto r = population_shielding_error(file.network, M, a.ntot, mask, cfg);
      double predicted = 0.0;
      for (auto k : edges) predicted += rep.values[static_cast<Eigen::Index>(k)];
      stats = {{"mode", a.mode},
               {"mask", edges},
               {"ntot", a.ntot},
               {"step", cfg.step},
               {"predicted", predicted},
               {"empirical", r.variance},
               {"stderr", r.std_error},
               {"full_variance",
                {{"predicted", rep.values.sum()}, {"empirical", r.full_variance}, {"stderr", r.full_std_error}}},
               {"measurement_mean", {{"predicted", mean_pred}, {"empirical", r.full_mean}, {"stderr", r.full_mean_std_error}}},
               {"clamp_events", r.clamp_events},
               {"valid", r.valid}};
      if (!r.valid) os << "warning: more than 0.1% of steps truncated an outflow; reduce the step size\n";
      if (a.stride > 0) {
        PopulationOptions opt;
        opt.t_final = a.t_final;
        opt.burn_in = burn;
        opt.seed = a.seed;
        opt.record_stride = a.stride;
        const auto start = PopulationState::stationary_start(file.network, a.ntot);
        const auto run = method == PopulationMethod::TauLeap ? tau_leap(file.network, start, cfg.step, opt, mask)
                                                             : discrete_multinomial(file.network, start, cfg.step, opt, mask);
        std::ostringstream csv;
        write_population_csv(csv, run);
        out.write("trajectory.csv", csv.str());
      }
    }
  }
  out.json("stats.json", stats);
  out.finish();
  os << stats.dump(2) << '\n';
}

struct EnsembleArgs {
  std::string experiment, n = "50", p = "0.5", out = "stoshield-out";
  std::size_t samples = 10, n1 = 0, draws = 10000;
  std::uint64_t seed = 1;
};

void cmd_ensemble(const EnsembleArgs& a, const std::string& command, std::ostream& os) {
  const auto n_grid = parse_index_list(a.n, "/n");
  const auto p_grid = parse_real_list(a.p, "/p");
  if (n_grid.empty()) throw SchemaError("at least one n is required", "/n");
  if (p_grid.empty()) throw SchemaError("at least one p is required", "/p");
  Output out(a.out, command, a.seed);
  out.config() = {{"experiment", a.experiment}, {"n", n_grid}, {"p", p_grid}, {"samples", a.samples}, {"seed", a.seed}};
  ordered_json summary{{"experiment", a.experiment}};
  std::ostringstream csv;
  const ERConfig base{n_grid.front(), p_grid.front(), a.seed, a.samples, 0};

  if (a.experiment == "moments") {
    MomentScaling sc;
    if (n_grid.size() >= 2) {
      sc = moment_scaling(n_grid, p_grid.front(), a.seed, a.samples);
      summary["q_fit"] = sc.q_fit;
      summary["intercept"] = sc.intercept;
    } else {
      sc.rows.push_back(eigenvector_moments(base, a.draws));
      summary["q_fit"] = nullptr;
    }
    write_moments_csv(csv, sc);
    out.write("moments.csv", csv.str());
  } else if (a.experiment == "s-stat") {
    const auto rows = s_sweep(p_grid, n_grid, a.samples, a.seed);
    write_s_sweep_csv(csv, rows);
    out.write("s_stat.csv", csv.str());
    ordered_json scaled = ordered_json::array();
    for (const auto& r : rows) scaled.push_back({{"n", r.n}, {"p", r.p}, {"scaled", r.scaled}});
    summary["s_times_2pn"] = scaled;
  } else if (a.experiment == "clusters") {
    const std::size_t n1 = a.n1 ? a.n1 : base.n / 2;
    out.config()["n1"] = n1;
    const auto ex = rk_cluster_experiment(base, n1);
    write_clusters_csv(csv, ex);
    out.write("clusters.csv", csv.str());
    summary["n1"] = n1;
    summary["important_mean"] = ex.important_mean;
    summary["unimportant_max"] = ex.unimportant_max;
    summary["gap_ratio_mean"] = ex.gap_ratio_mean;
    summary["gap_ratio_min"] = ex.gap_ratio_min;
    summary["averaged_unimportant_max"] = ex.averaged_unimportant_max;
    summary["averaged_gap_ratio"] = ex.averaged_gap_ratio;
    summary["theory_important"] = 1.0 / (static_cast<double>(base.n) * 2.0 * base.p);
  } else if (a.experiment == "graded") {
    const auto ex = graded_experiment(base);
    write_graded_csv(csv, ex);
    out.write("graded.csv", csv.str());
    summary["a_fit"] = ex.a_fit;
    summary["theory_a"] = 1.0 / (static_cast<double>(base.n) * 2.0 * base.p);
  } else if (a.experiment == "components") {
    write_components_csv(csv, eigenvector_components(base));
    out.write("components.csv", csv.str());
  } else {
    throw SchemaError("experiment must be one of moments, s-stat, clusters, graded, components", "/experiment");
  }
  out.json("summary.json", summary);
  out.finish();
  os << summary.dump(2) << '\n';
}

struct HHArgs {
  std::string channel, out = "stoshield-out";
  double vmin = -100, vmax = 100, dv = 1, ntot = 1;
};

void cmd_hh(const HHArgs& a, const std::string& command, std::ostream& os) {
  const auto kind = parse_channel_kind(a.channel);
  if (!(a.dv > 0.0) || !(a.vmax >= a.vmin)) throw SchemaError("need dv > 0 and vmax >= vmin", "/dv");
  if (!(a.ntot > 0.0)) throw SchemaError("ntot must be positive", "/ntot");
  const auto grid = voltage_grid(a.vmin, a.vmax, a.dv);
  const auto sweep = voltage_sweep_importance(kind, grid, a.ntot);
  const auto ref = build_channel(kind, grid.front(), a.ntot);

  Output out(a.out, command, 0);
  out.config() = {{"channel", to_string(kind)}, {"vmin", a.vmin}, {"vmax", a.vmax}, {"dv", a.dv}, {"ntot", a.ntot}};
  std::ostringstream sweep_csv, occ_csv;
  write_sweep_csv(sweep_csv, ref.network, sweep);
  write_occupancy_csv(occ_csv, sweep);
  out.write("importance.csv", sweep_csv.str());
  out.write("occupancy.csv", occ_csv.str());

  auto switches = [&](const Matrix& curves) {
    const auto dom = dominant_pairs(curves);
    ordered_json list = ordered_json::array();
    // Rows that vanish identically (current variance at V_rev) have no argmax.
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < dom.size(); ++i)
      if (curves.row(static_cast<Eigen::Index>(i)).cwiseAbs().maxCoeff() > 0.0) rows.push_back(i);
    for (std::size_t r = 0; r + 1 < rows.size(); ++r)
      if (const std::size_t i = rows[r]; dom[i] != dom[rows[r + 1]]) {
        const auto v = crossing_voltage(std::vector<double>(grid.begin() + static_cast<std::ptrdiff_t>(i), grid.end()),
                                        curves.bottomRows(curves.rows() - static_cast<Eigen::Index>(i)), dom[i], dom[rows[r + 1]]);
        const auto& p = ref.pairs;
        list.push_back({{"from_edges", {p[dom[i]].first, p[dom[i]].second}},
                        {"to_edges", {p[dom[rows[r + 1]]].first, p[dom[rows[r + 1]]].second}},
                        {"voltage", v ? ordered_json(*v) : ordered_json(nullptr)}});
      }
    return list;
  };
  const ordered_json summary{{"channel", to_string(kind)},
                             {"grid_points", grid.size()},
                             {"importance_switches", switches(sweep.importance)},
                             {"current_variance_switches", switches(sweep.current)},
                             {"max_imag_eigenvalue", sweep.max_imag_eigenvalue}};
  out.json("summary.json", summary);
  out.finish();
  os << summary.dump(2) << '\n';
}

}  // namespace

int exit_code_for(const std::exception& e) noexcept {
  if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
  if (dynamic_cast<const NumericalError*>(&e)) return kExitNumerical;
  if (dynamic_cast<const ConnectivityError*>(&e)) return kExitSampling;
  return 1;
}

int run_cli(const std::vector<std::string>& args, std::ostream& os, std::ostream& err) {
  CLI::App app{"Stochastic shielding toolkit: edge importance, OU and population simulation, ensembles"};
  app.require_subcommand(1);
  std::size_t threads = 0;
  app.add_option("--threads", threads, "worker threads (default: STOSHIELD_THREADS or hardware)");

  ImportanceArgs imp;
  auto* c_imp = app.add_subcommand("importance", "edge importances R_k and the optimal reduction plan");
  c_imp->add_option("network", imp.network, "network JSON")->required();
  c_imp->add_option("--measurement", imp.measurement, "comma-separated M, overrides the file");
  c_imp->add_option("--budget", imp.budget, "number of edges to neglect");
  c_imp->add_option("--out", imp.out, "output directory");

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "paired reduced/full simulation");
  c_sim->set_help_flag("--help", "print this help message and exit");  // -h would clash with --h
  c_sim->add_option("network", sim.network, "network JSON")->required();
  c_sim->add_option("--mode", sim.mode, "ou|ssa|tauleap|multinomial")
      ->check(CLI::IsMember({"ou", "ssa", "tauleap", "multinomial"}));
  c_sim->add_option("--measurement", sim.measurement, "comma-separated M, overrides the file");
  c_sim->add_option("--plan", sim.plan, "neglected edges (ou), e.g. 0,1");
  c_sim->add_option("--mask", sim.mask, "shielded edges (tauleap, multinomial)");
  c_sim->add_option("--dt", sim.dt, "Euler-Maruyama step");
  c_sim->add_option("--tau", sim.tau, "tau-leap step");
  c_sim->add_option("--h", sim.h, "multinomial step");
  c_sim->add_option("--t-final", sim.t_final, "simulated time per trial");
  c_sim->add_option("--burn-in", sim.burn_in, "discarded initial time");
  c_sim->add_option("--trials", sim.trials, "independent trials");
  c_sim->add_option("--seed", sim.seed, "master seed");
  c_sim->add_option("--ntot", sim.ntot, "population size (population modes)");
  c_sim->add_option("--stride", sim.stride, "write trial-0 trajectory keeping every k-th step (0: none)");
  c_sim->add_option("--out", sim.out, "output directory");

  EnsembleArgs ens;
  auto* c_ens = app.add_subcommand("ensemble", "Erdos-Renyi ensemble experiments");
  c_ens->add_option("--experiment", ens.experiment, "moments|s-stat|clusters|graded|components")->required();
  c_ens->add_option("--n", ens.n, "node counts, comma-separated");
  c_ens->add_option("--p", ens.p, "edge probabilities, comma-separated");
  c_ens->add_option("--samples", ens.samples, "graphs per grid point");
  c_ens->add_option("--seed", ens.seed, "master seed");
  c_ens->add_option("--n1", ens.n1, "measured block size for clusters (default n/2)");
  c_ens->add_option("--draws", ens.draws, "component draws for the moments experiment");
  c_ens->add_option("--out", ens.out, "output directory");

  HHArgs hh;
  auto* c_hh = app.add_subcommand("hh", "voltage sweep of Hodgkin-Huxley channel importances");
  c_hh->add_option("--channel", hh.channel, "K|Na")->required();
  c_hh->add_option("--vmin", hh.vmin, "lowest voltage (mV)");
  c_hh->add_option("--vmax", hh.vmax, "highest voltage (mV)");
  c_hh->add_option("--dv", hh.dv, "voltage step (mV)");
  c_hh->add_option("--ntot", hh.ntot, "channel count");
  c_hh->add_option("--out", hh.out, "output directory");

  std::string suite = "fast";
  auto* c_val = app.add_subcommand("validate", "run the invariant suites");
  c_val->add_option("--suite", suite, "fast|full")->check(CLI::IsMember({"fast", "full"}));

  const std::string command = joined(args);
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, os, err);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (threads > 0) set_default_threads(threads);
    if (*c_imp) cmd_importance(imp, command, os);
    if (*c_sim) cmd_simulate(sim, command, os);
    if (*c_ens) cmd_ensemble(ens, command, os);
    if (*c_hh) cmd_hh(hh, command, os);
    if (*c_val) {
      const bool ok = print_report(os, run_suite(parse_suite(suite)));
      return ok ? 0 : kExitValidation;
    }
    return 0;
  } catch (const StepSizeError& e) {
    err << "error: " << e.what() << "\nsuggested step: " << format_real(e.suggested()) << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args, out, err);
}

}  // namespace stoshield
