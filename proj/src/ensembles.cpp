#include "stoshield/ensembles.hpp"

#include "stoshield/csv.hpp"
#include "stoshield/errors.hpp"
#include "stoshield/parallel.hpp"
#include "stoshield/random.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <functional>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

namespace stoshield {

namespace {

constexpr std::size_t kMaxRejections = 1000;

std::uint64_t sample_key(std::size_t n, std::size_t index) {
  return (static_cast<std::uint64_t>(n) << 32) ^ static_cast<std::uint64_t>(index);
}

struct DisjointSets {
  std::vector<std::size_t> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), std::size_t{0}); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[a] = b;
    return true;
  }
};

Matrix symmetric_laplacian(const ReactionNetwork& net) { return build_laplacian(net); }

// Eigenvectors of the symmetric Laplacian, modes sorted by decreasing λ.
EigenSystem symmetric_system(const ReactionNetwork& net) {
  return eigendecompose(symmetric_laplacian(net), true);
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double std_error_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double mu = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - mu) * (x - mu);
  const double n = static_cast<double>(v.size());
  return std::sqrt(ss / (n - 1.0) / n);
}

MeasurementVector first_block(std::size_t n, std::size_t n1) {
  Vector v = Vector::Zero(static_cast<Eigen::Index>(n));
  v.head(static_cast<Eigen::Index>(n1)).setOnes();
  return MeasurementVector(v);
}

}  // namespace

void ERConfig::validate() const {
  if (n < 3) throw SchemaError("ER ensembles need n >= 3", "/n");
  if (!(p > 0.0 && p <= 1.0)) throw SchemaError("edge probability must be in (0, 1]", "/p");
  if (samples < 1) throw SchemaError("samples must be >= 1", "/samples");
}

ERSample sample_er(const ERConfig& cfg, std::size_t index) {
  cfg.validate();
  const std::size_t n = cfg.n;
  for (std::size_t attempt = 0; attempt < kMaxRejections; ++attempt) {
    KeyedStream rng(cfg.seed, static_cast<std::uint64_t>(StreamDomain::Ensemble), sample_key(n, index), attempt);
    std::vector<EdgeSpec> edges;
    edges.reserve(static_cast<std::size_t>(cfg.p * static_cast<double>(n * (n - 1))) + 16);
    DisjointSets sets(n);
    std::size_t components = n;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (rng.uniform() < cfg.p) {
          edges.push_back({i, j, 1.0});
          edges.push_back({j, i, 1.0});
          if (sets.unite(i, j)) --components;
        }
    if (components == 1) return ERSample{ReactionNetwork(n, edges), attempt};
  }
  throw ConnectivityError("ER sampling rejected " + std::to_string(kMaxRejections) +
                              " consecutive disconnected graphs (n=" + std::to_string(n) +
                              ", p=" + std::to_string(cfg.p) + ")",
                          kMaxRejections);
}

IndexMoments index_moments(const Eigen::Ref<const Vector>& v) {
  const double n = static_cast<double>(v.size());
  if (v.size() < 2) throw std::invalid_argument("index moments need n >= 2");
  const double a = v.sum(), b = v.squaredNorm(), c = v.array().cube().sum(), d = v.array().square().square().sum();
  const double d2 = n * (n - 1.0), d3 = d2 * (n - 2.0), d4 = d3 * (n - 3.0);
  IndexMoments m;
  m.fourth = d / n;
  m.pair = (a * a - b) / d2;
  m.sq_sq = (b * b - d) / d2;
  if (v.size() >= 3) m.third_sq = (a * a * b - 2.0 * a * c + 2.0 * d - b * b) / d3;
  if (v.size() >= 4) m.third_lin = (std::pow(a, 4) - 6.0 * a * a * b + 3.0 * b * b + 8.0 * a * c - 6.0 * d) / d4;
  return m;
}

MomentReport eigenvector_moments(const ERConfig& cfg, std::size_t component_draws) {
  cfg.validate();
  const std::size_t n = cfg.n;
  const double nd = static_cast<double>(n);

  struct PerGraph {
    double v4 = 0, cross_ii = 0, cross_ij = 0, sq_sq = 0, third_sq = 0, third_lin = 0, norm_err = 0;
    std::vector<double> draws;
    std::size_t rejections = 0;
  };
  auto one = [&](std::size_t s) {
    const auto sample = sample_er(cfg, s);
    const auto eig = symmetric_system(sample.network);
    const Matrix V = eig.right.real().rightCols(static_cast<Eigen::Index>(n - 1));
    const auto r = V.cols();
    PerGraph g;
    g.rejections = sample.rejections;
    const Vector p1 = V.colwise().sum().transpose();
    for (Eigen::Index i = 0; i < r; ++i) {
      const auto mo = index_moments(V.col(i));
      g.v4 += mo.fourth;
      g.cross_ii += std::abs(mo.pair);
      g.sq_sq += mo.sq_sq;
      g.third_sq += mo.third_sq;
      g.third_lin += mo.third_lin;
      g.norm_err = std::max(g.norm_err, std::abs(V.col(i).norm() - 1.0));
    }
    const double rr = static_cast<double>(r);
    g.v4 /= rr;
    g.cross_ii /= rr;
    g.sq_sq /= rr;
    g.third_sq /= rr;
    g.third_lin /= rr;
    const double d2 = nd * (nd - 1.0);
    // Σ_{l≠l'} v_i(l) v_j(l') = p1_i p1_j − v_i·v_j for i ≠ j.
    if (r >= 2) {
      const Matrix gram = V.transpose() * V;
      double acc = 0.0;
      for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < r; ++j)
          if (i != j) acc += std::abs((p1[i] * p1[j] - gram(i, j)) / d2);
      g.cross_ij = acc / (rr * (rr - 1.0));
    }
    KeyedStream signs(cfg.seed, static_cast<std::uint64_t>(StreamDomain::Signs), sample_key(n, s));
    std::vector<double> sign(static_cast<std::size_t>(r));
    for (auto& x : sign) x = signs.uniform() < 0.5 ? -1.0 : 1.0;
    g.draws.reserve(component_draws);
    for (std::size_t t = 0; t < component_draws; ++t) {
      const auto i = static_cast<Eigen::Index>(signs.uniform() * rr);
      const auto l = static_cast<Eigen::Index>(signs.uniform() * nd);
      g.draws.push_back(sign[static_cast<std::size_t>(i)] * V(l, i));
    }
    return g;
  };
  const auto graphs = parallel_map(cfg.samples, one, cfg.threads);

  MomentReport rep;
  rep.n = n;
  rep.samples = cfg.samples;
  std::vector<double> v4, sqsq, draws;
  for (const auto& g : graphs) {
    v4.push_back(g.v4);
    sqsq.push_back(g.sq_sq);
    rep.e_cross_ii += g.cross_ii;
    rep.e_cross_ij += g.cross_ij;
    rep.e_third_sq += g.third_sq;
    rep.e_third_lin += g.third_lin;
    rep.max_norm_error = std::max(rep.max_norm_error, g.norm_err);
    rep.rejections += g.rejections;
    draws.insert(draws.end(), g.draws.begin(), g.draws.end());
  }
  const double k = static_cast<double>(graphs.size());
  rep.e_v4 = mean_of(v4);
  rep.e_v4_se = std_error_of(v4);
  rep.e_sq_sq = mean_of(sqsq);
  rep.e_sq_sq_se = std_error_of(sqsq);
  rep.e_cross_ii /= k;
  rep.e_cross_ij /= k;
  rep.e_third_sq /= k;
  rep.e_third_lin /= k;
  rep.component_draws = draws.size();
  rep.component_mean = mean_of(draws);
  rep.component_mean_se = std_error_of(draws);
  return rep;
}

MomentScaling moment_scaling(const std::vector<std::size_t>& n_grid, double p, std::uint64_t seed,
                             std::size_t samples, std::size_t threads) {
  if (n_grid.size() < 2) throw SchemaError("moment scaling needs at least two grid points", "/n");
  MomentScaling out;
  for (auto n : n_grid) out.rows.push_back(eigenvector_moments(ERConfig{n, p, seed, samples, threads}));
  std::vector<double> x, y;
  for (const auto& r : out.rows) {
    x.push_back(std::log(static_cast<double>(r.n)));
    y.push_back(std::log(r.e_v4));
  }
  const double mx = mean_of(x), my = mean_of(y);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  const double slope = sxy / sxx;
  out.q_fit = -slope;
  out.intercept = my - slope * mx;
  return out;
}

double s_statistic(const ComplexVector& eigenvalues) {
  const auto n = eigenvalues.size();
  if (n < 2) throw std::invalid_argument("S needs at least one non-neutral mode");
  const ComplexVector lam = eigenvalues.tail(n - 1);
  std::complex<double> acc = 0.0;
  for (Eigen::Index i = 0; i < lam.size(); ++i)
    for (Eigen::Index j = 0; j < lam.size(); ++j) {
      const auto s = lam[i] + lam[j];
      if (std::abs(s) == 0.0) throw SpectralSingularity("lambda_i + lambda_j vanishes");
      acc += -1.0 / s;
    }
  const double r = static_cast<double>(n - 1);
  return acc.real() / (r * r);
}

SStatistic s_statistic(const ReactionNetwork& net, double p) {
  const Matrix L = build_laplacian(net);
  ComplexVector lambda;
  if (net.has_symmetric_rates()) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(L, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw DefectiveMatrix("self-adjoint eigensolver failed");
    Vector ev = solver.eigenvalues();  // ascending, so the neutral mode is last
    std::sort(ev.data(), ev.data() + ev.size(), std::greater<>());
    lambda = ev.cast<std::complex<double>>();
  } else {
    lambda = eigendecompose(L, false).eigenvalues;
  }
  return SStatistic{s_statistic(lambda), net.node_count(), p};
}

std::vector<SSweepRow> s_sweep(const std::vector<double>& p_grid, const std::vector<std::size_t>& n_grid,
                               std::size_t samples, std::uint64_t seed, std::size_t threads) {
  std::vector<SSweepRow> rows;
  for (double p : p_grid)
    for (auto n : n_grid) {
      const ERConfig cfg{n, p, seed, samples, threads};
      cfg.validate();
      const auto values = parallel_map(
          samples, [&](std::size_t s) { return s_statistic(sample_er(cfg, s).network, p).value; }, threads);
      SSweepRow row{n, p, mean_of(values), std_error_of(values), 0.0};
      row.scaled = row.mean_s * 2.0 * p * static_cast<double>(n);
      rows.push_back(row);
    }
  return rows;
}

ClusterSummary rk_clusters(const ReactionNetwork& net, const EdgeImportanceReport& report,
                           const MeasurementVector& M) {
  if (!M.is_binary()) throw SchemaError("cluster split needs a binary measurement", "/measurement");
  ClusterSummary s;
  constexpr double inf = std::numeric_limits<double>::infinity();
  s.important_min = s.unimportant_min = inf;
  s.important_max = s.unimportant_max = -inf;
  for (const auto& e : net.edges()) {
    const double r = report.values[static_cast<Eigen::Index>(e.index)];
    if (M.across(e) != 0.0) {
      ++s.important_count;
      s.important_mean += r;
      s.important_min = std::min(s.important_min, r);
      s.important_max = std::max(s.important_max, r);
    } else {
      ++s.unimportant_count;
      s.unimportant_mean += r;
      s.unimportant_min = std::min(s.unimportant_min, r);
      s.unimportant_max = std::max(s.unimportant_max, r);
    }
  }
  if (s.important_count) s.important_mean /= static_cast<double>(s.important_count);
  else s.important_min = s.important_max = 0.0;
  if (s.unimportant_count) s.unimportant_mean /= static_cast<double>(s.unimportant_count);
  else s.unimportant_min = s.unimportant_max = 0.0;
  if (!s.important_count) s.gap_ratio = 0.0;
  else if (!s.unimportant_count || s.unimportant_max <= 0.0) s.gap_ratio = inf;
  else s.gap_ratio = s.important_min / s.unimportant_max;
  return s;
}

ClusterExperiment rk_cluster_experiment(const ERConfig& cfg, std::size_t n1) {
  cfg.validate();
  if (n1 == 0 || n1 >= cfg.n) throw SchemaError("need 0 < n1 < n", "/n1");
  const auto M = first_block(cfg.n, n1);
  struct One {
    ClusterSummary summary;
    EdgeImportanceReport report;
    std::vector<char> important;
  };
  const auto runs = parallel_map(
      cfg.samples,
      [&](std::size_t s) {
        const auto sample = sample_er(cfg, s);
        const auto& net = sample.network;
        auto report = edge_importance(net, symmetric_system(net), M, NoiseSpec::unit());
        std::vector<char> imp(net.edge_count());
        for (const auto& e : net.edges()) imp[e.index] = M.across(e) != 0.0;
        return One{rk_clusters(net, report, M), std::move(report), std::move(imp)};
      },
      cfg.threads);
  ClusterExperiment exp;
  exp.gap_ratio_min = std::numeric_limits<double>::infinity();
  for (const auto& r : runs) {
    exp.per_sample.push_back(r.summary);
    exp.reports.push_back(r.report);
    exp.important.push_back(r.important);
    exp.important_mean += r.summary.important_mean;
    exp.unimportant_max = std::max(exp.unimportant_max, r.summary.unimportant_max);
    exp.gap_ratio_mean += r.summary.gap_ratio;
    exp.gap_ratio_min = std::min(exp.gap_ratio_min, r.summary.gap_ratio);
  }
  exp.important_mean /= static_cast<double>(runs.size());
  exp.gap_ratio_mean /= static_cast<double>(runs.size());

  auto averaged = [&](bool want) {
    std::vector<std::vector<double>> curves;
    std::size_t len = std::numeric_limits<std::size_t>::max();
    for (const auto& r : runs) {
      std::vector<double> c;
      for (std::size_t k = 0; k < r.important.size(); ++k)
        if ((r.important[k] != 0) == want) c.push_back(r.report.values[static_cast<Eigen::Index>(k)]);
      std::sort(c.begin(), c.end(), std::greater<>());
      len = std::min(len, c.size());
      curves.push_back(std::move(c));
    }
    std::vector<double> avg(len, 0.0);
    for (const auto& c : curves)
      for (std::size_t i = 0; i < len; ++i) avg[i] += c[i] / static_cast<double>(curves.size());
    return avg;
  };
  exp.averaged_important = averaged(true);
  exp.averaged_unimportant = averaged(false);
  if (!exp.averaged_unimportant.empty()) exp.averaged_unimportant_max = exp.averaged_unimportant.front();
  exp.averaged_gap_ratio = exp.averaged_important.empty() ? 0.0
                           : exp.averaged_unimportant_max > 0.0
                               ? exp.averaged_important.back() / exp.averaged_unimportant_max
                               : std::numeric_limits<double>::infinity();
  return exp;
}

GradedExperiment graded_experiment(const ERConfig& cfg) {
  cfg.validate();
  const auto per = parallel_map(
      cfg.samples,
      [&](std::size_t s) {
        const auto sample = sample_er(cfg, s);
        const auto& net = sample.network;
        KeyedStream rng(cfg.seed, static_cast<std::uint64_t>(StreamDomain::Graded), sample_key(cfg.n, s));
        Vector m(static_cast<Eigen::Index>(cfg.n));
        for (Eigen::Index l = 0; l < m.size(); ++l) m[l] = rng.uniform();
        const MeasurementVector M(m);
        const auto report = edge_importance(net, symmetric_system(net), M, NoiseSpec::unit());
        std::vector<GradedPoint> pts;
        pts.reserve(net.edge_count());
        for (const auto& e : net.edges())
          pts.push_back({s, e.index, std::abs(M.across(e)), report.values[static_cast<Eigen::Index>(e.index)]});
        return pts;
      },
      cfg.threads);
  GradedExperiment exp;
  double num = 0.0, den = 0.0;
  for (const auto& pts : per)
    for (const auto& p : pts) {
      exp.points.push_back(p);
      num += p.x * p.x * p.r;
      den += std::pow(p.x, 4);
    }
  exp.a_fit = den > 0.0 ? num / den : 0.0;
  return exp;
}

std::vector<ComponentRow> eigenvector_components(const ERConfig& cfg) {
  cfg.validate();
  const auto per = parallel_map(
      cfg.samples,
      [&](std::size_t s) {
        const auto sample = sample_er(cfg, s);
        const auto eig = symmetric_system(sample.network);
        KeyedStream signs(cfg.seed, static_cast<std::uint64_t>(StreamDomain::Signs), sample_key(cfg.n, s));
        std::vector<ComponentRow> rows;
        for (Eigen::Index i = 1; i < eig.size(); ++i) {
          const double sg = signs.uniform() < 0.5 ? -1.0 : 1.0;
          for (Eigen::Index l = 0; l < eig.size(); ++l)
            rows.push_back({s, static_cast<std::size_t>(i), static_cast<std::size_t>(l), sg * eig.right(l, i).real()});
        }
        return rows;
      },
      cfg.threads);
  std::vector<ComponentRow> out;
  for (const auto& r : per) out.insert(out.end(), r.begin(), r.end());
  return out;
}

void write_moments_csv(std::ostream& os, const MomentScaling& scaling) {
  os << "n,samples,e_v4,e_v4_se,e_cross_ii,e_cross_ij,e_sq_sq,e_sq_sq_se,e_third_sq,e_third_lin,"
        "component_mean,component_mean_se,reference_sqrt2_n_pow_m5_3,reference_n_pow_m2\n";
  for (const auto& r : scaling.rows) {
    const double n = static_cast<double>(r.n);
    CsvRow(os) << r.n << r.samples << r.e_v4 << r.e_v4_se << r.e_cross_ii << r.e_cross_ij << r.e_sq_sq
               << r.e_sq_sq_se << r.e_third_sq << r.e_third_lin << r.component_mean << r.component_mean_se
               << std::sqrt(2.0) * std::pow(n, -5.0 / 3.0) << 1.0 / (n * n);
  }
}

void write_s_sweep_csv(std::ostream& os, const std::vector<SSweepRow>& rows) {
  os << "n,p,S_mean,S_stderr,S_times_2pn\n";
  for (const auto& r : rows) CsvRow(os) << r.n << r.p << r.mean_s << r.std_error << r.scaled;
}

void write_clusters_csv(std::ostream& os, const ClusterExperiment& exp) {
  os << "sample,rank,k,R_k,important\n";
  for (std::size_t s = 0; s < exp.reports.size(); ++s) {
    const auto& rep = exp.reports[s];
    for (std::size_t r = 0; r < rep.ranking.size(); ++r) {
      const auto k = rep.ranking[r];
      CsvRow(os) << s << r << k << rep.values[static_cast<Eigen::Index>(k)]
                 << static_cast<int>(exp.important[s][k]);
    }
  }
}

void write_graded_csv(std::ostream& os, const GradedExperiment& exp) {
  os << "sample,k,abs_M_zeta,R_k\n";
  for (const auto& p : exp.points) CsvRow(os) << p.sample << p.k << p.x << p.r;
}

void write_components_csv(std::ostream& os, const std::vector<ComponentRow>& rows) {
  os << "sample,mode,index,value\n";
  for (const auto& r : rows) CsvRow(os) << r.sample << r.mode << r.index << r.value;
}

}  // namespace stoshield
