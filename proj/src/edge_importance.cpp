#include "stoshield/edge_importance.hpp"

#include "stoshield/csv.hpp"
#include "stoshield/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <string>

namespace stoshield {

namespace {

std::vector<std::size_t> descending_ranking(const Vector& values) {
  std::vector<std::size_t> order(static_cast<std::size_t>(values.size()));
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[static_cast<Eigen::Index>(a)] > values[static_cast<Eigen::Index>(b)];
  });
  return order;
}

double c_constant(double mean_edge_weight) {
  if (!(mean_edge_weight > 0.0) || !std::isfinite(mean_edge_weight))
    throw std::invalid_argument("mean edge weight must be positive");
  return 2.0 * mean_edge_weight;
}

}  // namespace

std::vector<std::size_t> EdgeImportanceReport::rank_of() const {
  std::vector<std::size_t> out(ranking.size());
  for (std::size_t r = 0; r < ranking.size(); ++r) out[ranking[r]] = r;
  return out;
}

EdgeImportanceReport edge_importance(const ReactionNetwork& net, const EigenSystem& eig,
                                     const MeasurementVector& M, const NoiseSpec& spec) {
  const auto n = static_cast<Eigen::Index>(net.node_count());
  const auto m = static_cast<Eigen::Index>(net.edge_count());
  if (eig.size() != n) throw std::invalid_argument("eigensystem size does not match network");
  if (static_cast<Eigen::Index>(M.size()) != n)
    throw SchemaError("measurement length must equal node count", "/measurement");

  EdgeImportanceReport report;
  report.measurement = M.values();
  report.sigmas = noise_sigmas(net, spec);
  report.values = Vector::Zero(m);
  if (n == 1) {
    report.ranking = descending_ranking(report.values);
    return report;
  }

  const auto r = n - 1;
  const ComplexVector lambda = eig.eigenvalues.tail(r);
  const double lscale = std::max(eig.eigenvalues.cwiseAbs().maxCoeff(), 1e-300);
  ComplexMatrix G(r, r);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < r; ++j) {
      const std::complex<double> s = lambda[i] + lambda[j];
      if (std::abs(s) <= 1e-13 * lscale)
        throw SpectralSingularity("lambda_i + lambda_j vanishes for non-neutral modes");
      G(i, j) = -1.0 / s;
    }
  const Eigen::MatrixXd Gabs = G.cwiseAbs();

  const ComplexVector Mv = eig.right.rightCols(r).transpose() * M.values().cast<std::complex<double>>();
  const ComplexMatrix Wc = eig.left.rightCols(r);

  ComplexVector c(r);
  for (const auto& e : net.edges()) {
    const auto k = static_cast<Eigen::Index>(e.index);
    for (Eigen::Index i = 0; i < r; ++i) c[i] = Mv[i] * (Wc(e.to, i) - Wc(e.from, i));
    const std::complex<double> q = c.transpose() * G * c;
    const Vector ca = c.cwiseAbs();
    const double bound = ca.dot(Gabs * ca);
    const double s2 = report.sigmas[k] * report.sigmas[k];
    if (std::abs(q.imag()) > 1e-10 * std::max(bound, 1e-300) && std::abs(q.imag()) * s2 > 1e-10)
      throw NumericalError("edge importance of edge " + std::to_string(e.index) +
                           " has a non-negligible imaginary part");
    double value = s2 * q.real();
    const double tol = 1e-10 * std::max(1.0, s2 * bound);
    if (value < -tol)
      throw NumericalError("edge importance of edge " + std::to_string(e.index) +
                           " is negative beyond rounding");
    report.values[k] = std::max(value, 0.0);
  }
  report.ranking = descending_ranking(report.values);
  return report;
}

EdgeImportanceReport edge_importance(const ReactionNetwork& net, const MeasurementVector& M,
                                     const NoiseSpec& spec) {
  const auto eig = eigendecompose(build_laplacian(net), net.has_symmetric_rates());
  return edge_importance(net, eig, M, spec);
}

double total_deficiency(const EdgeImportanceReport& report, const ReductionPlan& plan) {
  double sum = 0.0;
  for (auto k : plan.neglected) {
    if (k >= static_cast<std::size_t>(report.values.size()))
      throw IndexError("plan edge " + std::to_string(k) + " out of range");
    sum += report.values[static_cast<Eigen::Index>(k)];
  }
  return sum;
}

ReductionPlan make_plan(const EdgeImportanceReport& report, std::vector<std::size_t> neglected) {
  std::sort(neglected.begin(), neglected.end());
  neglected.erase(std::unique(neglected.begin(), neglected.end()), neglected.end());
  ReductionPlan plan{std::move(neglected), 0.0};
  plan.predicted_error = total_deficiency(report, plan);
  return plan;
}

ReductionPlan optimal_reduction(const EdgeImportanceReport& report, std::size_t budget) {
  const auto m = static_cast<std::size_t>(report.values.size());
  if (budget > m)
    throw IndexError("budget " + std::to_string(budget) + " exceeds edge count " +
                     std::to_string(m));
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return report.values[static_cast<Eigen::Index>(a)] < report.values[static_cast<Eigen::Index>(b)];
  });
  order.resize(budget);
  return make_plan(report, std::move(order));
}

double theorem2_prediction(const ReactionNetwork& net, const MeasurementVector& M,
                           std::size_t k, double mean_edge_weight, const NoiseSpec& spec) {
  if (!M.is_binary()) throw SchemaError("theorem2 prediction needs a binary measurement", "/measurement");
  const auto& e = net.edge(k);
  const double sigma = noise_sigmas(net, spec)[static_cast<Eigen::Index>(k)];
  const double n = static_cast<double>(net.node_count());
  return sigma * sigma * std::abs(M.across(e)) / (n * c_constant(mean_edge_weight));
}

double graded_prediction(const ReactionNetwork& net, const MeasurementVector& M,
                         std::size_t k, double mean_edge_weight, const NoiseSpec& spec) {
  if (!M.is_unit_interval())
    throw SchemaError("graded prediction needs measurement entries in [0,1]", "/measurement");
  const auto& e = net.edge(k);
  const double sigma = noise_sigmas(net, spec)[static_cast<Eigen::Index>(k)];
  const double n = static_cast<double>(net.node_count());
  const double d = M.across(e);
  return sigma * sigma * d * d / (n * c_constant(mean_edge_weight));
}

void write_importance_csv(std::ostream& os, const ReactionNetwork& net,
                          const EdgeImportanceReport& report) {
  const auto rank = report.rank_of();
  os << "k,from,to,rate,sigma,R_k,rank\n";
  for (const auto& e : net.edges()) {
    const auto k = static_cast<Eigen::Index>(e.index);
    CsvRow(os) << e.index << e.from << e.to << e.rate << report.sigmas[k] << report.values[k]
               << rank[e.index];
  }
}

}  // namespace stoshield
