#include "stoshield/channels.hpp"

#include "stoshield/csv.hpp"
#include "stoshield/errors.hpp"
#include "stoshield/parallel.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

namespace stoshield {

namespace {

// x / (1 − e^{−x}), with its series near the removable singularity.
double exprel_neg(double x) {
  if (std::abs(x) < 1e-6) return 1.0 + x / 2.0 + x * x / 12.0;
  return x / -std::expm1(-x);
}

double binom(int n, int k) {
  double c = 1.0;
  for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
  return c;
}

ReactionNetwork potassium_network(const RateSet& r) {
  const double a = r.alpha_n, b = r.beta_n;
  return ReactionNetwork(5, {{0, 1, 4 * a}, {1, 0, b}, {1, 2, 3 * a}, {2, 1, 2 * b},
                             {2, 3, 2 * a}, {3, 2, 3 * b}, {3, 4, a}, {4, 3, 4 * b}});
}

ReactionNetwork sodium_network(const RateSet& r) {
  const double am = r.alpha_m, bm = r.beta_m;
  std::vector<EdgeSpec> edges;
  for (std::size_t h = 0; h < 2; ++h) {
    const std::size_t base = 4 * h;
    for (std::size_t s = 0; s < 3; ++s) {
      edges.push_back({base + s, base + s + 1, static_cast<double>(3 - s) * am});
      edges.push_back({base + s + 1, base + s, static_cast<double>(s + 1) * bm});
    }
  }
  for (std::size_t s = 0; s < 4; ++s) {
    edges.push_back({s, s + 4, r.alpha_h});
    edges.push_back({s + 4, s, r.beta_h});
  }
  return ReactionNetwork(8, edges);
}

}  // namespace

ChannelKind parse_channel_kind(const std::string& name) {
  if (name == "K") return ChannelKind::K;
  if (name == "Na") return ChannelKind::Na;
  throw SchemaError("unknown channel '" + name + "' (expected K or Na)", "/channel");
}

const char* to_string(ChannelKind kind) noexcept { return kind == ChannelKind::K ? "K" : "Na"; }

RateSet rates(double V) {
  if (!std::isfinite(V)) throw std::invalid_argument("voltage must be finite");
  RateSet r;
  r.V = V;
  r.alpha_n = 0.1 * exprel_neg(0.1 * (V + 55.0));
  r.beta_n = 0.125 * std::exp(-(V + 65.0) / 80.0);
  r.alpha_m = exprel_neg((V + 40.0) / 10.0);
  r.beta_m = 4.0 * std::exp(-(V + 65.0) / 18.0);
  r.alpha_h = 0.07 * std::exp(-(V + 65.0) / 20.0);
  r.beta_h = 1.0 / (1.0 + std::exp(-(V + 35.0) / 10.0));
  return r;
}

ChannelModel build_channel(ChannelKind kind, double V, double n_tot) {
  if (!(n_tot > 0.0)) throw SchemaError("channel count must be positive", "/ntot");
  const auto r = rates(V);
  if (kind == ChannelKind::K) {
    Vector m = Vector::Zero(5);
    m[4] = 1.0;
    ChannelModel model{kind, V, potassium_network(r), MeasurementVector(m), -77.0, 1.0,
                       NoiseSpec::stationary_flux(n_tot), {}};
    for (std::size_t k = 0; k < 8; k += 2) model.pairs.emplace_back(k, k + 1);
    return model;
  }
  Vector m = Vector::Zero(8);
  m[7] = 1.0;
  ChannelModel model{kind, V, sodium_network(r), MeasurementVector(m), 45.0, 1.0,
                     NoiseSpec::stationary_flux(n_tot), {}};
  for (std::size_t k = 0; k < 20; k += 2) model.pairs.emplace_back(k, k + 1);
  return model;
}

std::vector<double> voltage_grid(double v_min, double v_max, double dv) {
  if (!(dv > 0.0) || !(v_max >= v_min)) throw SchemaError("need dv > 0 and vmax >= vmin", "/dv");
  std::vector<double> grid;
  const auto count = static_cast<std::size_t>(std::floor((v_max - v_min) / dv + 1e-3)) + 1;
  for (std::size_t i = 0; i < count; ++i) grid.push_back(v_min + dv * static_cast<double>(i));
  return grid;
}

Vector potassium_closed_form(double V) {
  const auto r = rates(V);
  const double a = r.alpha_n / (r.alpha_n + r.beta_n);
  Vector pi(5);
  for (int s = 0; s <= 4; ++s) pi[s] = binom(4, s) * std::pow(a, s) * std::pow(1.0 - a, 4 - s);
  return pi;
}

Vector sodium_closed_form(double V) {
  const auto r = rates(V);
  const double a = r.alpha_m / (r.alpha_m + r.beta_m);
  const double b = r.alpha_h / (r.alpha_h + r.beta_h);
  Vector pi(8);
  for (int h = 0; h < 2; ++h)
    for (int s = 0; s <= 3; ++s)
      pi[4 * h + s] = binom(3, s) * std::pow(a, s) * std::pow(1.0 - a, 3 - s) * (h ? b : 1.0 - b);
  return pi;
}

Matrix current_variance(ChannelKind kind, const std::vector<double>& grid, const Matrix& importance) {
  const double vrev = kind == ChannelKind::K ? -77.0 : 45.0;
  Matrix out = importance;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double drive = grid[i] - vrev;
    out.row(static_cast<Eigen::Index>(i)) *= drive * drive;
  }
  return out;
}

Matrix occupancy_curves(ChannelKind kind, const std::vector<double>& grid) {
  const auto n = kind == ChannelKind::K ? 5 : 8;
  Matrix out(static_cast<Eigen::Index>(grid.size()), n);
  for (std::size_t i = 0; i < grid.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = stationary_distribution(build_channel(kind, grid[i]).network).transpose();
  return out;
}

VoltageSweep voltage_sweep_importance(ChannelKind kind, const std::vector<double>& grid, double n_tot,
                                      std::size_t threads) {
  struct Point {
    Vector r, pi;
    double imag = 0.0;
  };
  const auto points = parallel_map(
      grid.size(),
      [&](std::size_t i) {
        const auto model = build_channel(kind, grid[i], n_tot);
        const Matrix L = build_laplacian(model.network);
        EigenSystem eig;
        try {
          eig = eigendecompose(L, false);
        } catch (const DefectiveMatrix& e) {
          std::ostringstream os;
          os << "at V=" << grid[i] << " mV: " << e.what();
          throw DefectiveMatrix(os.str());
        }
        const auto report = edge_importance(model.network, eig, model.M, model.noise);
        return Point{report.values, stationary_distribution(model.network),
                     eig.eigenvalues.imag().cwiseAbs().maxCoeff()};
      },
      threads);
  VoltageSweep sweep{kind, grid, {}, {}, {}, 0.0};
  if (points.empty()) return sweep;
  const auto g = static_cast<Eigen::Index>(grid.size());
  sweep.importance.resize(g, points.front().r.size());
  sweep.occupancy.resize(g, points.front().pi.size());
  for (Eigen::Index i = 0; i < g; ++i) {
    const auto& p = points[static_cast<std::size_t>(i)];
    sweep.importance.row(i) = p.r.transpose();
    sweep.occupancy.row(i) = p.pi.transpose();
    sweep.max_imag_eigenvalue = std::max(sweep.max_imag_eigenvalue, p.imag);
  }
  sweep.current = current_variance(kind, grid, sweep.importance);
  return sweep;
}

std::size_t dominant_pair(const Eigen::Ref<const Vector>& row) {
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < row.size(); ++k)
    if (row[k] > row[best]) best = k;
  return static_cast<std::size_t>(best) / 2;
}

std::vector<std::size_t> dominant_pairs(const Matrix& curves) {
  std::vector<std::size_t> out;
  for (Eigen::Index i = 0; i < curves.rows(); ++i) out.push_back(dominant_pair(curves.row(i).transpose()));
  return out;
}

std::optional<double> crossing_voltage(const std::vector<double>& grid, const Matrix& curves,
                                       std::size_t from, std::size_t to) {
  const auto dom = dominant_pairs(curves);
  for (std::size_t i = 0; i + 1 < dom.size(); ++i) {
    if (dom[i] != from || dom[i + 1] != to) continue;
    const auto r0 = static_cast<Eigen::Index>(i), r1 = r0 + 1;
    const auto a = static_cast<Eigen::Index>(2 * from), b = static_cast<Eigen::Index>(2 * to);
    const double d0 = curves(r0, a) - curves(r0, b);
    const double d1 = curves(r1, a) - curves(r1, b);
    const double frac = d0 != d1 ? d0 / (d0 - d1) : 0.5;
    return grid[i] + frac * (grid[i + 1] - grid[i]);
  }
  return std::nullopt;
}

void write_sweep_csv(std::ostream& os, const ReactionNetwork& reference, const VoltageSweep& sweep) {
  os << "V,k,from,to,R_k,current_variance\n";
  for (std::size_t i = 0; i < sweep.voltages.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (const auto& e : reference.edges()) {
      const auto k = static_cast<Eigen::Index>(e.index);
      CsvRow(os) << sweep.voltages[i] << e.index << e.from << e.to << sweep.importance(r, k) << sweep.current(r, k);
    }
  }
}

void write_occupancy_csv(std::ostream& os, const VoltageSweep& sweep) {
  os << "V,state,probability\n";
  for (std::size_t i = 0; i < sweep.voltages.size(); ++i)
    for (Eigen::Index s = 0; s < sweep.occupancy.cols(); ++s)
      CsvRow(os) << sweep.voltages[i] << s << sweep.occupancy(static_cast<Eigen::Index>(i), s);
}

}  // namespace stoshield
