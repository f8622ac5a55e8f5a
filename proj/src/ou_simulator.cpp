#include "stoshield/ou_simulator.hpp"

#include "stoshield/csv.hpp"
#include "stoshield/errors.hpp"
#include "stoshield/parallel.hpp"
#include "stoshield/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

namespace stoshield {

namespace {

constexpr std::size_t kBatches = 10;

// Mean over trials. The error pools the batch means of every trial
// (kBatches per trial), which estimates the spread far more stably than ten
// trial means do; batches are independent once each spans several
// relaxation times.
struct TrialSummary {
  double mean = 0.0;
  double std_error = 0.0;
};

TrialSummary summarize(const std::vector<std::vector<double>>& batches_per_trial,
                       const std::vector<double>& trial_means) {
  TrialSummary s;
  std::vector<double> v;
  for (const auto& b : batches_per_trial) v.insert(v.end(), b.begin(), b.end());
  if (trial_means.empty()) return s;
  s.mean = std::accumulate(trial_means.begin(), trial_means.end(), 0.0) /
           static_cast<double>(trial_means.size());
  if (v.size() < 2) return s;
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  s.std_error = std::sqrt(ss / (n - 1.0) / n);
  return s;
}

// Running sums over kBatches contiguous blocks of `count` samples.
class BatchAccumulator {
 public:
  explicit BatchAccumulator(std::size_t count) : count_(count), sums_(kBatches, 0.0), sizes_(kBatches, 0) {}
  void add(std::size_t index, double x) {
    const std::size_t b = std::min(kBatches - 1, index * kBatches / std::max<std::size_t>(count_, 1));
    sums_[b] += x;
    ++sizes_[b];
    total_ += x;
    ++n_;
  }
  double mean() const { return n_ ? total_ / static_cast<double>(n_) : 0.0; }
  std::vector<double> batch_means() const {
    std::vector<double> out;
    for (std::size_t b = 0; b < kBatches; ++b)
      if (sizes_[b]) out.push_back(sums_[b] / static_cast<double>(sizes_[b]));
    return out;
  }

 private:
  std::size_t count_;
  std::vector<double> sums_;
  std::vector<std::size_t> sizes_;
  double total_ = 0.0;
  std::size_t n_ = 0;
};

std::vector<char> neglect_mask(const ReactionNetwork& net, const ReductionPlan& plan) {
  std::vector<char> mask(net.edge_count(), 0);
  for (auto k : plan.neglected) {
    if (k >= net.edge_count()) throw IndexError("plan edge " + std::to_string(k) + " out of range");
    mask[k] = 1;
  }
  return mask;
}

// x += dt · L x, evaluated edge by edge so column sums stay zero.
void drift_step(const ReactionNetwork& net, Vector& x, Vector& flux_buf, double dt) {
  const auto edges = net.edges();
  for (std::size_t k = 0; k < edges.size(); ++k)
    flux_buf[static_cast<Eigen::Index>(k)] = edges[k].rate * x[edges[k].from] * dt;
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const double f = flux_buf[static_cast<Eigen::Index>(k)];
    x[edges[k].from] -= f;
    x[edges[k].to] += f;
  }
}

void noise_step(const ReactionNetwork& net, Vector& x, const Vector& kicks, const std::vector<char>* mask) {
  for (const auto& e : net.edges()) {
    if (mask && (*mask)[e.index]) continue;
    const double w = kicks[static_cast<Eigen::Index>(e.index)];
    x[e.from] -= w;
    x[e.to] += w;
  }
}

std::vector<KeyedStream> edge_streams(const ReactionNetwork& net, std::uint64_t seed, std::size_t trial) {
  std::vector<KeyedStream> streams;
  streams.reserve(net.edge_count());
  for (std::size_t k = 0; k < net.edge_count(); ++k)
    streams.emplace_back(seed, static_cast<std::uint64_t>(StreamDomain::OU), trial, k);
  return streams;
}

std::size_t first_index_after(double burn_in, double dt) {
  return static_cast<std::size_t>(std::ceil(burn_in / dt - 1e-9));
}

}  // namespace

void SimConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw SchemaError("dt must be positive", "/dt");
  if (!(burn_in >= 0.0)) throw SchemaError("burn_in must be >= 0", "/burn_in");
  if (!(t_final > burn_in) || !std::isfinite(t_final))
    throw SchemaError("t_final must exceed burn_in", "/t_final");
  if (trials < 1) throw SchemaError("trials must be >= 1", "/trials");
  if (record_stride < 1) throw SchemaError("record stride must be >= 1", "/stride");
}

std::size_t SimConfig::steps() const {
  return static_cast<std::size_t>(std::llround(t_final / dt));
}

double relaxation_rate(const EigenSystem& eig) {
  if (eig.size() < 2) return 0.0;
  return std::abs(eig.eigenvalues[1].real());
}

void check_stability(const EigenSystem& eig, double dt) {
  const double rho = spectral_radius(eig);
  if (dt * rho >= 0.5) {
    const double suggested = 0.25 / rho;
    std::ostringstream os;
    os << "Euler-Maruyama step dt=" << dt << " violates dt*|lambda|max < 0.5 (|lambda|max=" << rho
       << "); try dt <= " << suggested;
    throw StabilityError(os.str(), suggested);
  }
}

PairedOUPath simulate_pair(const ReactionNetwork& net, const MeasurementVector& M,
                           const NoiseSpec& spec, const ReductionPlan& plan,
                           const SimConfig& cfg, std::size_t trial) {
  cfg.validate();
  if (M.size() != net.node_count()) throw SchemaError("measurement length must equal node count", "/measurement");
  const auto eig = eigendecompose(build_laplacian(net), net.has_symmetric_rates());
  check_stability(eig, cfg.dt);
  const auto mask = neglect_mask(net, plan);
  const Vector sigma = noise_sigmas(net, spec);
  const auto n = static_cast<Eigen::Index>(net.node_count());
  const auto m = static_cast<Eigen::Index>(net.edge_count());
  auto streams = edge_streams(net, cfg.seed, trial);

  PairedOUPath path;
  const std::size_t steps = cfg.steps();
  const std::size_t stored = steps / cfg.record_stride + 1;
  path.times.reserve(stored);
  path.X.reserve(stored);
  path.X_tilde.reserve(stored);
  path.U.reserve(stored);
  Vector x = Vector::Zero(n), xt = Vector::Zero(n), flux(m), kicks(m);
  const double sqdt = std::sqrt(cfg.dt);
  auto record = [&](std::size_t step) {
    path.times.push_back(static_cast<double>(step) * cfg.dt);
    path.X.push_back(x);
    path.X_tilde.push_back(xt);
    path.U.push_back(xt - x);
    path.Y.push_back(M.values().dot(x));
    path.Y_tilde.push_back(M.values().dot(xt));
  };
  record(0);
  for (std::size_t s = 1; s <= steps; ++s) {
    for (Eigen::Index k = 0; k < m; ++k) kicks[k] = sigma[k] * sqdt * streams[static_cast<std::size_t>(k)].normal();
    drift_step(net, x, flux, cfg.dt);
    drift_step(net, xt, flux, cfg.dt);
    noise_step(net, x, kicks, nullptr);
    noise_step(net, xt, kicks, &mask);
    if (s % cfg.record_stride == 0) record(s);
  }
  return path;
}

std::vector<PairedOUPath> simulate_pairs(const ReactionNetwork& net, const MeasurementVector& M,
                                         const NoiseSpec& spec, const ReductionPlan& plan,
                                         const SimConfig& cfg) {
  return parallel_map(
      cfg.trials, [&](std::size_t t) { return simulate_pair(net, M, spec, plan, cfg, t); }, cfg.threads);
}

namespace {

template <typename F>
TrialSummary summarize_paths(std::span<const PairedOUPath> paths, double burn_in, F value) {
  if (paths.empty()) throw std::invalid_argument("no paths to summarize");
  std::vector<std::vector<double>> batches;
  std::vector<double> means;
  for (const auto& p : paths) {
    std::size_t first = 0;
    while (first < p.times.size() && p.times[first] < burn_in - 1e-12) ++first;
    if (first >= p.times.size()) throw SchemaError("burn_in leaves no samples", "/burn_in");
    BatchAccumulator acc(p.times.size() - first);
    for (std::size_t i = first; i < p.times.size(); ++i) acc.add(i - first, value(p, i));
    batches.push_back(acc.batch_means());
    means.push_back(acc.mean());
  }
  return summarize(batches, means);
}

}  // namespace

DeficiencyStats deficiency_stats(std::span<const PairedOUPath> paths, const MeasurementVector& M,
                                 double burn_in, double relaxation) {
  DeficiencyStats out;
  out.trials = paths.size();
  auto mu = [&](const PairedOUPath& p, std::size_t i) { return M.values().dot(p.U[i]); };
  const auto sq = summarize_paths(paths, burn_in, [&](const PairedOUPath& p, std::size_t i) {
    const double y = mu(p, i);
    return y * y;
  });
  const auto lin = summarize_paths(paths, burn_in, mu);
  out.empirical_mse = sq.mean;
  out.std_error = sq.std_error;
  out.mean_deficiency = lin.mean;
  out.mean_std_error = lin.std_error;
  for (const auto& p : paths) {
    const auto one = summarize_paths(std::span<const PairedOUPath>(&p, 1), burn_in,
                                     [&](const PairedOUPath& q, std::size_t i) {
                                       const double y = mu(q, i);
                                       return y * y;
                                     });
    out.per_trial_mse.push_back(one.mean);
  }
  if (relaxation > 0.0) {
    const double available = paths.front().times.back() - burn_in;
    const double required = 20.0 / relaxation;
    if (available < required) {
      std::ostringstream os;
      os << "averaging window " << available << " is shorter than 20 relaxation times (" << required << ")";
      out.warning = HorizonWarning{required, available, os.str()};
    }
  }
  return out;
}

VarianceEstimate variance_estimate(std::span<const PairedOUPath> paths, const MeasurementVector& M,
                                   double burn_in) {
  const auto s = summarize_paths(paths, burn_in, [&](const PairedOUPath& p, std::size_t i) {
    const double y = M.values().dot(p.X[i]);
    return y * y;
  });
  return {s.mean, s.std_error};
}

std::vector<double> mse_curve(std::span<const PairedOUPath> paths, const MeasurementVector& M) {
  if (paths.empty()) return {};
  std::vector<double> out(paths.front().times.size(), 0.0);
  for (const auto& p : paths) {
    if (p.times.size() != out.size()) throw std::invalid_argument("paths have different lengths");
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double y = M.values().dot(p.U[i]);
      out[i] += y * y;
    }
  }
  for (auto& v : out) v /= static_cast<double>(paths.size());
  return out;
}

MultiPlanResult simulate_plans(const ReactionNetwork& net, const MeasurementVector& M,
                               const NoiseSpec& spec, std::span<const ReductionPlan> plans,
                               const SimConfig& cfg) {
  cfg.validate();
  if (M.size() != net.node_count()) throw SchemaError("measurement length must equal node count", "/measurement");
  const auto eig = eigendecompose(build_laplacian(net), net.has_symmetric_rates());
  check_stability(eig, cfg.dt);
  std::vector<std::vector<char>> masks;
  for (const auto& p : plans) masks.push_back(neglect_mask(net, p));
  const Vector sigma = noise_sigmas(net, spec);
  const auto n = static_cast<Eigen::Index>(net.node_count());
  const auto m = static_cast<Eigen::Index>(net.edge_count());
  const std::size_t steps = cfg.steps();
  const std::size_t first = first_index_after(cfg.burn_in, cfg.dt);
  if (first > steps) throw SchemaError("burn_in leaves no samples", "/burn_in");
  const std::size_t count = steps - first + 1;

  struct TrialOut {
    std::vector<BatchAccumulator> sq, lin;
    BatchAccumulator var;
  };
  auto run_trial = [&](std::size_t trial) {
    auto streams = edge_streams(net, cfg.seed, trial);
    TrialOut out{std::vector<BatchAccumulator>(plans.size(), BatchAccumulator(count)),
                 std::vector<BatchAccumulator>(plans.size(), BatchAccumulator(count)),
                 BatchAccumulator(count)};
    Vector x = Vector::Zero(n), flux(m), kicks(m);
    std::vector<Vector> xr(plans.size(), Vector::Zero(n));
    const double sqdt = std::sqrt(cfg.dt);
    const Vector& Mv = M.values();
    auto accumulate = [&](std::size_t s) {
      if (s < first) return;
      const double y = Mv.dot(x);
      out.var.add(s - first, y * y);
      for (std::size_t p = 0; p < plans.size(); ++p) {
        const double u = Mv.dot(xr[p]) - y;
        out.sq[p].add(s - first, u * u);
        out.lin[p].add(s - first, u);
      }
    };
    accumulate(0);
    for (std::size_t s = 1; s <= steps; ++s) {
      for (Eigen::Index k = 0; k < m; ++k)
        kicks[k] = sigma[k] * sqdt * streams[static_cast<std::size_t>(k)].normal();
      drift_step(net, x, flux, cfg.dt);
      noise_step(net, x, kicks, nullptr);
      for (std::size_t p = 0; p < plans.size(); ++p) {
        drift_step(net, xr[p], flux, cfg.dt);
        noise_step(net, xr[p], kicks, &masks[p]);
      }
      accumulate(s);
    }
    return out;
  };
  const auto trials = parallel_map(cfg.trials, run_trial, cfg.threads);

  MultiPlanResult result;
  const double relax = relaxation_rate(eig);
  for (std::size_t p = 0; p < plans.size(); ++p) {
    std::vector<std::vector<double>> bsq, blin;
    std::vector<double> msq, mlin;
    for (const auto& t : trials) {
      bsq.push_back(t.sq[p].batch_means());
      msq.push_back(t.sq[p].mean());
      blin.push_back(t.lin[p].batch_means());
      mlin.push_back(t.lin[p].mean());
    }
    DeficiencyStats st;
    st.trials = cfg.trials;
    const auto a = summarize(bsq, msq);
    const auto b = summarize(blin, mlin);
    st.empirical_mse = a.mean;
    st.std_error = a.std_error;
    st.mean_deficiency = b.mean;
    st.mean_std_error = b.std_error;
    st.per_trial_mse = msq;
    const double available = cfg.t_final - cfg.burn_in;
    if (relax > 0.0 && available < 20.0 / relax) {
      std::ostringstream os;
      os << "averaging window " << available << " is shorter than 20 relaxation times ("
         << 20.0 / relax << ")";
      st.warning = HorizonWarning{20.0 / relax, available, os.str()};
    }
    result.plans.push_back(std::move(st));
  }
  std::vector<std::vector<double>> bv;
  std::vector<double> mv;
  for (const auto& t : trials) {
    bv.push_back(t.var.batch_means());
    mv.push_back(t.var.mean());
  }
  const auto v = summarize(bv, mv);
  result.full_variance = {v.mean, v.std_error};
  return result;
}

void write_path_csv(std::ostream& os, const PairedOUPath& path) {
  const auto n = path.X.empty() ? 0 : path.X.front().size();
  {
    CsvRow row(os);
    row << "t";
    for (Eigen::Index i = 0; i < n; ++i) row << "X_" + std::to_string(i);
    for (Eigen::Index i = 0; i < n; ++i) row << "Xtilde_" + std::to_string(i);
    row << "Y" << "Y_tilde";
  }
  for (std::size_t s = 0; s < path.times.size(); ++s) {
    CsvRow row(os);
    row << path.times[s];
    for (Eigen::Index i = 0; i < n; ++i) row << path.X[s][i];
    for (Eigen::Index i = 0; i < n; ++i) row << path.X_tilde[s][i];
    row << path.Y[s] << path.Y_tilde[s];
  }
}

}  // namespace stoshield
