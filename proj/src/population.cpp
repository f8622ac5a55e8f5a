#include "stoshield/population.hpp"

#include "stoshield/csv.hpp"
#include "stoshield/errors.hpp"
#include "stoshield/parallel.hpp"
#include "stoshield/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <tuple>
#include <ostream>
#include <sstream>

namespace stoshield {

namespace {

constexpr std::size_t kWindows = 10;
constexpr double kClampLimit = 1e-3;

// Time-weighted moments over [burn_in, t_final], split into kWindows windows.
class StationaryAccumulator {
 public:
  StationaryAccumulator(Eigen::Index n, double burn_in, double t_final)
      : start_(burn_in), end_(t_final), sum_(Vector::Zero(n)), sq_(Matrix::Zero(n, n)),
        wsum_(kWindows, Vector::Zero(n)), wweight_(kWindows, 0.0) {}

  void hold(double t0, double t1, const Vector& x) {
    t0 = std::max(t0, start_);
    t1 = std::min(t1, end_);
    if (!(t1 > t0)) return;
    const double w = t1 - t0;
    sum_ += w * x;
    sq_.noalias() += w * x * x.transpose();
    weight_ += w;
    const double width = (end_ - start_) / static_cast<double>(kWindows);
    auto b0 = std::min(kWindows - 1, static_cast<std::size_t>((t0 - start_) / width));
    const auto b1 = std::min(kWindows - 1, static_cast<std::size_t>((t1 - start_) / width));
    for (auto b = b0; b <= b1; ++b) {
      const double lo = std::max(t0, start_ + width * static_cast<double>(b));
      const double hi = b == kWindows - 1 ? t1 : std::min(t1, start_ + width * static_cast<double>(b + 1));
      if (hi > lo) {
        wsum_[b] += (hi - lo) * x;
        wweight_[b] += hi - lo;
      }
    }
  }

  void finish(PopulationRun& run) const {
    if (!(weight_ > 0.0)) throw SchemaError("burn_in leaves no averaging window", "/burn_in");
    run.time_mean = sum_ / weight_;
    run.time_cov = sq_ / weight_ - run.time_mean * run.time_mean.transpose();
    run.batch_means.clear();
    for (std::size_t b = 0; b < kWindows; ++b)
      if (wweight_[b] > 0.0) run.batch_means.push_back(wsum_[b] / wweight_[b]);
  }

 private:
  double start_, end_;
  Vector sum_;
  Matrix sq_;
  double weight_ = 0.0;
  std::vector<Vector> wsum_;
  std::vector<double> wweight_;
};

void validate_start(const ReactionNetwork& net, const PopulationState& n0) {
  if (static_cast<std::size_t>(n0.counts.size()) != net.node_count())
    throw SchemaError("initial state length must equal node count", "/initial");
  for (Eigen::Index i = 0; i < n0.counts.size(); ++i)
    if (!(n0.counts[i] >= 0.0) || !std::isfinite(n0.counts[i]))
      throw SchemaError("initial counts must be finite and >= 0", "/initial/" + std::to_string(i));
}

void validate_options(const PopulationOptions& opt) {
  if (!(opt.t_final > opt.burn_in) || !(opt.burn_in >= 0.0))
    throw SchemaError("t_final must exceed burn_in >= 0", "/t_final");
}

std::vector<std::vector<std::size_t>> out_edge_lists(const ReactionNetwork& net) {
  std::vector<std::vector<std::size_t>> out(net.node_count());
  for (const auto& e : net.edges()) out[e.from].push_back(e.index);
  return out;
}

// Truncate outflows in edge order so no node goes negative, then move
// the flows. Returns the number of truncated nodes.
std::size_t apply_flows(const ReactionNetwork& net, const std::vector<std::vector<std::size_t>>& out,
                        Vector& x, Vector& flows) {
  std::size_t truncated = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    double total = 0.0;
    for (auto k : out[i]) total += flows[static_cast<Eigen::Index>(k)];
    const double avail = x[static_cast<Eigen::Index>(i)];
    if (total <= avail) continue;
    ++truncated;
    double remaining = avail;
    for (auto k : out[i]) {
      auto& f = flows[static_cast<Eigen::Index>(k)];
      f = std::min(f, remaining);
      remaining -= f;
    }
  }
  const auto edges = net.edges();
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const double f = flows[static_cast<Eigen::Index>(k)];
    x[edges[k].from] -= f;
    x[edges[k].to] += f;
  }
  // Rounding can leave −1e−16 behind after a full drain.
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (x[i] < 0.0) x[i] = 0.0;
  return truncated;
}

std::vector<KeyedStream> population_streams(const ReactionNetwork& net, std::uint64_t seed,
                                            std::size_t trial) {
  std::vector<KeyedStream> streams;
  streams.reserve(net.edge_count());
  for (std::size_t k = 0; k < net.edge_count(); ++k)
    streams.emplace_back(seed, static_cast<std::uint64_t>(StreamDomain::Population), trial, k);
  return streams;
}

double max_exit_rate(const ReactionNetwork& net) { return net.out_rates().maxCoeff(); }

template <typename FlowFn>
PopulationRun fixed_step_run(const ReactionNetwork& net, const PopulationState& n0, double step,
                             const PopulationOptions& opt, FlowFn flow_fn) {
  validate_start(net, n0);
  validate_options(opt);
  const auto n = static_cast<Eigen::Index>(net.node_count());
  const auto m = net.edge_count();
  const auto out = out_edge_lists(net);
  auto streams = population_streams(net, opt.seed, opt.trial);
  const double n_tot = n0.total();
  const auto steps = static_cast<std::size_t>(std::llround((opt.t_final - n0.t) / step));

  PopulationRun run;
  StationaryAccumulator acc(n, opt.burn_in, opt.t_final);
  Vector x = n0.counts;
  std::vector<double> u(m);
  double t = n0.t;
  if (opt.record_stride) {
    run.times.push_back(t);
    run.states.push_back(x);
  }
  for (std::size_t s = 1; s <= steps; ++s) {
    acc.hold(t, t + step, x);
    for (std::size_t k = 0; k < m; ++k) u[k] = streams[k].uniform();
    Vector flows = flow_fn(x, std::span<const double>(u));
    const auto cut = apply_flows(net, out, x, flows);
    run.clamp_events += cut;
    if (cut) ++run.clamped_steps;
    t = n0.t + static_cast<double>(s) * step;
    run.max_conservation_error = std::max(run.max_conservation_error, std::abs(x.sum() - n_tot));
    if (opt.record_stride && s % opt.record_stride == 0) {
      run.times.push_back(t);
      run.states.push_back(x);
    }
  }
  run.steps = steps;
  run.valid = static_cast<double>(run.clamped_steps) <= kClampLimit * static_cast<double>(std::max<std::size_t>(steps, 1));
  run.final_state = {x, t};
  acc.finish(run);
  return run;
}

}  // namespace

PopulationState PopulationState::stationary_start(const ReactionNetwork& net, std::uint64_t n_tot) {
  const Vector pi = stationary_distribution(net);
  const Vector target = pi * static_cast<double>(n_tot);
  Vector counts = target.array().floor();
  auto missing = static_cast<long long>(std::llround(static_cast<double>(n_tot) - counts.sum()));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(pi.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return target[a] - counts[a] > target[b] - counts[b];
  });
  for (std::size_t i = 0; missing > 0; ++i, --missing) counts[order[i % order.size()]] += 1.0;
  return {counts, 0.0};
}

std::vector<char> ShieldingMask::flags(std::size_t edge_count) const {
  std::vector<char> f(edge_count, 0);
  for (auto k : shielded) {
    if (k >= edge_count) throw IndexError("shielded edge " + std::to_string(k) + " out of range");
    f[k] = 1;
  }
  return f;
}

PopulationMethod parse_population_method(const std::string& name) {
  if (name == "ssa") return PopulationMethod::Ssa;
  if (name == "tauleap") return PopulationMethod::TauLeap;
  if (name == "multinomial") return PopulationMethod::Multinomial;
  throw SchemaError("unknown population method '" + name + "'", "/mode");
}

const char* to_string(PopulationMethod m) noexcept {
  switch (m) {
    case PopulationMethod::Ssa: return "ssa";
    case PopulationMethod::TauLeap: return "tauleap";
    case PopulationMethod::Multinomial: return "multinomial";
  }
  return "unknown";
}

PopulationRun ssa_exact(const ReactionNetwork& net, const PopulationState& n0,
                        const PopulationOptions& opt) {
  validate_start(net, n0);
  validate_options(opt);
  for (Eigen::Index i = 0; i < n0.counts.size(); ++i)
    if (n0.counts[i] != std::floor(n0.counts[i]))
      throw SchemaError("SSA needs integer counts", "/initial/" + std::to_string(i));
  const auto n = static_cast<Eigen::Index>(net.node_count());
  const auto edges = net.edges();
  KeyedStream rng(opt.seed, static_cast<std::uint64_t>(StreamDomain::Ssa), opt.trial);
  std::exponential_distribution<double> wait(1.0);
  const double n_tot = n0.total();

  PopulationRun run;
  StationaryAccumulator acc(n, opt.burn_in, opt.t_final);
  Vector x = n0.counts;
  std::vector<double> prop(edges.size());
  double t = n0.t;
  if (opt.record_stride) {
    run.times.push_back(t);
    run.states.push_back(x);
  }
  while (true) {
    double a0 = 0.0;
    for (std::size_t k = 0; k < edges.size(); ++k) {
      prop[k] = edges[k].rate * x[edges[k].from];
      a0 += prop[k];
    }
    if (!(a0 > 0.0)) {
      if (n_tot == 0.0) {
        acc.hold(t, opt.t_final, x);
        t = opt.t_final;
        break;
      }
      throw NumericalError("SSA reached a state with zero total propensity");
    }
    const double tau = wait(rng.engine()) / a0;
    if (t + tau >= opt.t_final) {
      acc.hold(t, opt.t_final, x);
      t = opt.t_final;
      break;
    }
    acc.hold(t, t + tau, x);
    t += tau;
    const double target = rng.uniform() * a0;
    std::size_t k = 0;
    double c = prop[0];
    while (k + 1 < edges.size() && target >= c) c += prop[++k];
    while (prop[k] == 0.0 && k > 0) --k;  // rounding past the last live channel
    x[edges[k].from] -= 1.0;
    x[edges[k].to] += 1.0;
    ++run.steps;
    run.max_conservation_error = std::max(run.max_conservation_error, std::abs(x.sum() - n_tot));
    if (opt.record_stride && run.steps % opt.record_stride == 0) {
      run.times.push_back(t);
      run.states.push_back(x);
    }
  }
  run.final_state = {x, t};
  acc.finish(run);
  return run;
}

Vector tau_leap_flows(const ReactionNetwork& net, const Vector& counts, double tau,
                      std::span<const double> u, const std::vector<char>& shielded) {
  const auto edges = net.edges();
  Vector flows(static_cast<Eigen::Index>(edges.size()));
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const double mean = tau * edges[k].rate * counts[edges[k].from];
    flows[static_cast<Eigen::Index>(k)] =
        shielded[k] ? mean : static_cast<double>(poisson_inverse(u[k], mean));
  }
  return flows;
}

PopulationRun tau_leap(const ReactionNetwork& net, const PopulationState& n0, double tau,
                       const PopulationOptions& opt, const ShieldingMask& mask) {
  if (!(tau > 0.0)) throw SchemaError("tau must be positive", "/tau");
  const double dmax = max_exit_rate(net);
  if (tau * dmax >= 1.0) {
    const double suggested = 0.5 / dmax;
    std::ostringstream os;
    os << "tau=" << tau << " gives " << tau * dmax << " expected exits per individual and step (must be < 1); try tau <= " << suggested;
    throw TauTooLarge(os.str(), suggested);
  }
  const auto shielded = mask.flags(net.edge_count());
  return fixed_step_run(net, n0, tau, opt, [&](const Vector& x, std::span<const double> u) {
    return tau_leap_flows(net, x, tau, u, shielded);
  });
}

MultinomialStepper::MultinomialStepper(const ReactionNetwork& net, double h, const ShieldingMask& mask)
    : net_(&net), h_(h), shielded_(mask.flags(net.edge_count())), out_edges_(out_edge_lists(net)) {
  if (!(h > 0.0)) throw SchemaError("h must be positive", "/h");
  const double dmax = max_exit_rate(net);
  if (h * dmax > 1.0) {
    const double suggested = 1.0 / dmax;
    std::ostringstream os;
    os << "h=" << h << " makes a stay probability negative (h*max exit rate = " << h * dmax
       << "); try h <= " << suggested;
    throw StepTooLarge(os.str(), suggested);
  }
}

Vector MultinomialStepper::flows(const Vector& counts, std::span<const double> u) const {
  const auto edges = net_->edges();
  Vector f = Vector::Zero(static_cast<Eigen::Index>(edges.size()));
  for (std::size_t i = 0; i < out_edges_.size(); ++i) {
    const double Ni = counts[static_cast<Eigen::Index>(i)];
    const double whole = std::floor(Ni);
    const double frac = Ni - whole;
    auto remaining = static_cast<std::uint64_t>(whole);
    double rest = 1.0;
    for (auto k : out_edges_[i]) {
      const double p = edges[k].rate * h_;
      auto& fk = f[static_cast<Eigen::Index>(k)];
      if (shielded_[k]) {
        fk = Ni * p;
        continue;
      }
      const double q = rest > 0.0 ? std::min(1.0, p / rest) : 1.0;
      const auto c = binomial_inverse(u[k], remaining, q);
      remaining -= c;
      rest -= p;
      fk = static_cast<double>(c) + frac * p;
    }
  }
  return f;
}

PopulationRun discrete_multinomial(const ReactionNetwork& net, const PopulationState& n0, double h,
                                   const PopulationOptions& opt, const ShieldingMask& mask) {
  const MultinomialStepper stepper(net, h, mask);
  return fixed_step_run(net, n0, h, opt, [&](const Vector& x, std::span<const double> u) {
    return stepper.flows(x, u);
  });
}

ShieldingErrorReport population_shielding_error(const ReactionNetwork& net,
                                                const MeasurementVector& M, std::uint64_t n_tot,
                                                const ShieldingMask& mask,
                                                const PopulationConfig& cfg) {
  if (cfg.method == PopulationMethod::Ssa)
    throw SchemaError("paired shielding runs need a fixed-step method (tauleap or multinomial)", "/mode");
  if (M.size() != net.node_count()) throw SchemaError("measurement length must equal node count", "/measurement");
  if (cfg.trials < 1) throw SchemaError("trials must be >= 1", "/trials");
  if (!(cfg.t_final > cfg.burn_in) || !(cfg.burn_in >= 0.0))
    throw SchemaError("t_final must exceed burn_in >= 0", "/t_final");
  if (!(cfg.step > 0.0)) throw SchemaError("step must be positive", "/step");

  const auto shielded = mask.flags(net.edge_count());
  const std::vector<char> none(net.edge_count(), 0);
  const double dmax = max_exit_rate(net);
  std::optional<MultinomialStepper> full_step, shield_step;
  if (cfg.method == PopulationMethod::TauLeap) {
    if (cfg.step * dmax >= 1.0)
      throw TauTooLarge("tau*max exit rate must be < 1; try tau <= " + std::to_string(0.5 / dmax), 0.5 / dmax);
  } else {
    full_step.emplace(net, cfg.step);
    shield_step.emplace(net, cfg.step, mask);
  }
  const PopulationState start = PopulationState::stationary_start(net, n_tot);
  const auto out = out_edge_lists(net);
  const auto m = net.edge_count();
  const auto steps = static_cast<std::size_t>(std::llround(cfg.t_final / cfg.step));
  const Vector& Mv = M.values();

  struct TrialOut {
    double d = 0, d2 = 0, yf = 0, yf2 = 0, ys = 0, ys2 = 0;
    std::size_t count = 0, clamps = 0, clamped_steps = 0;
  };
  auto run_trial = [&](std::size_t trial) {
    auto streams = population_streams(net, cfg.seed, trial);
    Vector xf = start.counts, xs = start.counts;
    std::vector<double> u(m);
    TrialOut o;
    for (std::size_t s = 1; s <= steps; ++s) {
      for (std::size_t k = 0; k < m; ++k) u[k] = streams[k].uniform();
      Vector ff, fs;
      if (cfg.method == PopulationMethod::TauLeap) {
        ff = tau_leap_flows(net, xf, cfg.step, u, none);
        fs = tau_leap_flows(net, xs, cfg.step, u, shielded);
      } else {
        ff = full_step->flows(xf, u);
        fs = shield_step->flows(xs, u);
      }
      const auto cut = apply_flows(net, out, xf, ff) + apply_flows(net, out, xs, fs);
      o.clamps += cut;
      if (cut) ++o.clamped_steps;
      if (static_cast<double>(s) * cfg.step < cfg.burn_in) continue;
      const double yf = Mv.dot(xf), ys = Mv.dot(xs), d = ys - yf;
      o.d += d;
      o.d2 += d * d;
      o.yf += yf;
      o.yf2 += yf * yf;
      o.ys += ys;
      o.ys2 += ys * ys;
      ++o.count;
    }
    return o;
  };
  const auto trials = parallel_map(cfg.trials, run_trial, cfg.threads);

  auto mean_se = [&](auto value) {
    std::vector<double> v;
    for (const auto& t : trials) v.push_back(value(t));
    const double n = static_cast<double>(v.size());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::pair{mean, v.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0};
  };
  auto var_of = [](double s, double s2, std::size_t c) {
    const double n = static_cast<double>(std::max<std::size_t>(c, 1));
    return s2 / n - (s / n) * (s / n);
  };
  ShieldingErrorReport r;
  std::tie(r.variance, r.std_error) = mean_se([&](const TrialOut& t) { return var_of(t.d, t.d2, t.count); });
  std::tie(r.full_mean, r.full_mean_std_error) = mean_se([&](const TrialOut& t) {
    return t.yf / static_cast<double>(std::max<std::size_t>(t.count, 1));
  });
  std::tie(r.full_variance, r.full_std_error) = mean_se([&](const TrialOut& t) { return var_of(t.yf, t.yf2, t.count); });
  std::tie(r.shielded_variance, r.shielded_std_error) =
      mean_se([&](const TrialOut& t) { return var_of(t.ys, t.ys2, t.count); });
  std::size_t clamped = 0;
  for (const auto& t : trials) {
    r.clamp_events += t.clamps;
    clamped += t.clamped_steps;
  }
  r.valid = static_cast<double>(clamped) <= kClampLimit * static_cast<double>(steps * cfg.trials);
  return r;
}

OccupancySummary summarize_runs(std::span<const PopulationRun> runs) {
  if (runs.empty()) throw std::invalid_argument("no runs to summarize");
  const auto n = runs.front().time_mean.size();
  OccupancySummary s{Vector::Zero(n), Vector::Zero(n), Vector::Zero(n)};
  std::vector<Vector> samples;
  if (runs.size() >= 2)
    for (const auto& r : runs) samples.push_back(r.time_mean);
  else
    samples = runs.front().batch_means;
  for (const auto& r : runs) {
    s.mean += r.time_mean;
    s.variance += r.time_cov.diagonal();
  }
  s.mean /= static_cast<double>(runs.size());
  s.variance /= static_cast<double>(runs.size());
  if (samples.size() > 1) {
    Vector mu = Vector::Zero(n);
    for (const auto& v : samples) mu += v;
    mu /= static_cast<double>(samples.size());
    Vector ss = Vector::Zero(n);
    for (const auto& v : samples) ss += (v - mu).cwiseAbs2();
    const double k = static_cast<double>(samples.size());
    s.std_error = (ss / (k - 1.0) / k).cwiseSqrt();
  }
  return s;
}

void write_population_csv(std::ostream& os, const PopulationRun& run) {
  const auto n = run.states.empty() ? 0 : run.states.front().size();
  {
    CsvRow row(os);
    row << "t";
    for (Eigen::Index i = 0; i < n; ++i) row << "N_" + std::to_string(i);
  }
  for (std::size_t s = 0; s < run.states.size(); ++s) {
    CsvRow row(os);
    row << run.times[s];
    for (Eigen::Index i = 0; i < n; ++i) row << run.states[s][i];
  }
}

}  // namespace stoshield
