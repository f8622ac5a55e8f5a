#include "stoshield/edge_importance.hpp"
#include "stoshield/errors.hpp"
#include "stoshield/ou_simulator.hpp"

#include <doctest.h>

#include <sstream>

using namespace stoshield;

namespace {

ReactionNetwork chain3() { return ReactionNetwork(3, {{0, 1, 1.0}, {1, 0, 1.0}, {1, 2, 1.0}, {2, 1, 1.0}}); }
MeasurementVector third() { return MeasurementVector(Eigen::Vector3d(0, 0, 1)); }

// Exact stationary covariance of the Euler–Maruyama recursion
// X ← (I + hL)X + √h Bξ, by Smith doubling of Σ = AΣAᵀ + hBBᵀ.
Matrix discrete_lyapunov(const Matrix& L, const Matrix& B, double h) {
  const Eigen::Index n = L.rows();
  Matrix A = Matrix::Identity(n, n) + h * L;
  Matrix S = h * B * B.transpose();
  // Rounding along the kernel direction would double every sweep; keep
  // S on the conserved subspace 1ᵀx = 0.
  const Matrix P = Matrix::Identity(n, n) - Matrix::Constant(n, n, 1.0 / static_cast<double>(n));
  for (int it = 0; it < 40; ++it) {
    S += A * S * A.transpose();
    S = P * S * P;
    A = A * A;
  }
  return S;
}

double plan_oracle(const ReactionNetwork& net, const MeasurementVector& M, const std::vector<std::size_t>& plan,
                   double h) {
  const Matrix B = noise_matrix(net, NoiseSpec::unit());
  Matrix Bp = Matrix::Zero(B.rows(), B.cols());
  for (auto k : plan) Bp.col(static_cast<Eigen::Index>(k)) = B.col(static_cast<Eigen::Index>(k));
  return M.values().dot(discrete_lyapunov(build_laplacian(net), Bp, h) * M.values());
}

SimConfig config(double t_final, std::size_t trials, std::uint64_t seed) {
  SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.t_final = t_final;
  cfg.burn_in = 20.0;
  cfg.trials = trials;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("empty plan gives an identically zero deficiency") {
  auto cfg = config(50, 2, 1);
  const auto paths = simulate_pairs(chain3(), third(), NoiseSpec::unit(), ReductionPlan{}, cfg);
  for (const auto& p : paths)
    for (const auto& u : p.U) CHECK(u.cwiseAbs().maxCoeff() == 0.0);
  const auto st = deficiency_stats(paths, third(), cfg.burn_in);
  CHECK(st.empirical_mse == 0.0);
  CHECK(st.std_error == 0.0);
}

TEST_CASE("neglecting every edge freezes the reduced process") {
  auto cfg = config(50, 2, 2);
  const auto paths = simulate_pairs(chain3(), third(), NoiseSpec::unit(), ReductionPlan{{0, 1, 2, 3}, 0}, cfg);
  for (const auto& p : paths)
    for (const auto& x : p.X_tilde) CHECK(x.cwiseAbs().maxCoeff() == 0.0);
  const auto st = deficiency_stats(paths, third(), cfg.burn_in);
  CHECK(st.empirical_mse == doctest::Approx(variance_estimate(paths, third(), cfg.burn_in).value).epsilon(1e-12));
}

TEST_CASE("mass is conserved along paths") {
  auto cfg = config(30, 1, 3);
  const auto p = simulate_pair(chain3(), third(), NoiseSpec::unit(), ReductionPlan{{0, 1}, 0}, cfg);
  for (std::size_t i = 0; i < p.X.size(); ++i) {
    CHECK(std::abs(p.X[i].sum()) <= 1e-8);
    CHECK(std::abs(p.X_tilde[i].sum()) <= 1e-8);
    CHECK(p.Y[i] == p.X[i][2]);
  }
}

TEST_CASE("unstable step is rejected with a suggestion") {
  auto cfg = config(10, 1, 1);
  cfg.burn_in = 0;
  cfg.dt = 0.2;  // |λ|max = 3 for the chain
  try {
    simulate_pair(chain3(), third(), NoiseSpec::unit(), ReductionPlan{}, cfg);
    FAIL("expected StabilityError");
  } catch (const StabilityError& e) {
    CHECK(e.suggested() == doctest::Approx(0.25 / 3.0));
  }
}

TEST_CASE("configuration validation") {
  SimConfig cfg;
  cfg.dt = 0.0;
  CHECK_THROWS_AS(cfg.validate(), SchemaError);
  cfg = SimConfig{};
  cfg.burn_in = cfg.t_final;
  CHECK_THROWS_AS(cfg.validate(), SchemaError);
  cfg = SimConfig{};
  cfg.trials = 0;
  CHECK_THROWS_AS(cfg.validate(), SchemaError);
}

TEST_CASE("short horizons are flagged") {
  auto cfg = config(15, 1, 1);
  cfg.burn_in = 1;
  const auto paths = simulate_pairs(chain3(), third(), NoiseSpec::unit(), ReductionPlan{{0}, 0}, cfg);
  const auto st = deficiency_stats(paths, third(), cfg.burn_in, 1.0);
  REQUIRE(st.warning.has_value());
  CHECK(st.warning->required == doctest::Approx(20.0));
  const auto multi = simulate_plans(chain3(), third(), NoiseSpec::unit(), std::vector<ReductionPlan>{{{0}, 0}}, cfg);
  CHECK(multi.plans.front().warning.has_value());
}

TEST_CASE("runs are reproducible and independent of the thread count") {
  auto cfg = config(30, 4, 9);
  cfg.threads = 1;
  const std::vector<ReductionPlan> plans{{{0, 1}, 0}, {{2}, 0}};
  const auto a = simulate_plans(chain3(), third(), NoiseSpec::unit(), plans, cfg);
  cfg.threads = 4;
  const auto b = simulate_plans(chain3(), third(), NoiseSpec::unit(), plans, cfg);
  for (std::size_t p = 0; p < plans.size(); ++p) {
    CHECK(a.plans[p].empirical_mse == b.plans[p].empirical_mse);
    CHECK(a.plans[p].per_trial_mse == b.plans[p].per_trial_mse);
  }
  // The streaming runner and the stored-path runner share increments.
  const auto paths = simulate_pairs(chain3(), third(), NoiseSpec::unit(), plans[0], cfg);
  const auto st = deficiency_stats(paths, third(), cfg.burn_in);
  CHECK(st.empirical_mse == doctest::Approx(a.plans[0].empirical_mse).epsilon(1e-12));
  CHECK(variance_estimate(paths, third(), cfg.burn_in).value ==
        doctest::Approx(a.full_variance.value).epsilon(1e-12));
}

TEST_CASE("Monte Carlo deficiency matches the discrete-time oracle") {
  const auto cfg = config(1000, 8, 77);
  const std::vector<std::vector<std::size_t>> sets{{0, 1}, {2}, {0, 3}};
  std::vector<ReductionPlan> plans;
  for (const auto& s : sets) plans.push_back({s, 0.0});
  const auto res = simulate_plans(chain3(), third(), NoiseSpec::unit(), plans, cfg);
  // Seven simultaneous comparisons, hence 3.5 rather than 3 standard errors.
  for (std::size_t p = 0; p < sets.size(); ++p) {
    const double oracle = plan_oracle(chain3(), third(), sets[p], cfg.dt);
    const auto& st = res.plans[p];
    CHECK(std::abs(st.empirical_mse - oracle) <= 3.5 * st.std_error);
    CHECK(std::abs(st.mean_deficiency) <= 3.5 * st.mean_std_error);
  }
  CHECK(std::abs(res.full_variance.value - plan_oracle(chain3(), third(), {0, 1, 2, 3}, cfg.dt)) <=
        3.5 * res.full_variance.std_error);
}

TEST_CASE("halving dt moves the estimate by less than the Monte Carlo error") {
  const auto cfg = config(400, 8, 5);
  const auto res = simulate_plans(chain3(), third(), NoiseSpec::unit(), std::vector<ReductionPlan>{{{0, 1}, 0}}, cfg);
  const double bias = std::abs(plan_oracle(chain3(), third(), {0, 1}, cfg.dt) -
                               plan_oracle(chain3(), third(), {0, 1}, cfg.dt / 2));
  CHECK(bias < res.plans[0].std_error);
  // The discretization shift itself vanishes with dt.
  const auto rep = edge_importance(chain3(), third(), NoiseSpec::unit());
  const double exact = total_deficiency(rep, make_plan(rep, {0, 1}));
  CHECK(std::abs(plan_oracle(chain3(), third(), {0, 1}, 1e-4) - exact) < 1e-3 * exact);
}

TEST_CASE("two-state stationary variance") {
  const ReactionNetwork pair(2, {{0, 1, 1.0}, {1, 0, 1.0}});
  const MeasurementVector M(Eigen::Vector2d(0, 1));
  auto cfg = config(300, 6, 4);
  cfg.burn_in = 5;
  const auto res = simulate_plans(pair, M, NoiseSpec::unit(), std::vector<ReductionPlan>{{{0}, 0}}, cfg);
  CHECK(std::abs(res.full_variance.value - 0.5) <= 3.0 * res.full_variance.std_error);
  CHECK(std::abs(res.plans[0].empirical_mse - 0.25) <= 3.0 * res.plans[0].std_error);
}

TEST_CASE("MSE curve and path CSV") {
  auto cfg = config(5, 3, 8);
  cfg.burn_in = 0;
  cfg.record_stride = 100;
  const auto paths = simulate_pairs(chain3(), third(), NoiseSpec::unit(), ReductionPlan{{0, 1}, 0}, cfg);
  const auto curve = mse_curve(paths, third());
  CHECK(curve.size() == 51);
  CHECK(curve.front() == 0.0);
  std::ostringstream os;
  write_path_csv(os, paths.front());
  CHECK(os.str().rfind("t,X_0,X_1,X_2,Xtilde_0,Xtilde_1,Xtilde_2,Y,Y_tilde\n", 0) == 0);
}
