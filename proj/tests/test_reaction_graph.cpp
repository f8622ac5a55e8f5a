#include "stoshield/errors.hpp"
#include "stoshield/reaction_graph.hpp"

#include "support.hpp"

#include <doctest.h>

using namespace stoshield;

namespace {

ReactionNetwork chain3() { return ReactionNetwork(3, {{0, 1, 1.0}, {1, 0, 1.0}, {1, 2, 1.0}, {2, 1, 1.0}}); }

}  // namespace

TEST_CASE("three-state chain Laplacian") {
  Matrix expected(3, 3);
  expected << -1, 1, 0,
               1, -2, 1,
               0, 1, -1;
  CHECK((build_laplacian(chain3()) - expected).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("two-state Laplacian with unequal rates") {
  const ReactionNetwork net(2, {{0, 1, 2.0}, {1, 0, 1.0}});
  Matrix expected(2, 2);
  expected << -2, 1,
               2, -1;
  CHECK((build_laplacian(net) - expected).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("stoichiometry vectors") {
  const auto net = chain3();
  CHECK(stoichiometry(net, 0).entries == Eigen::Vector3i(-1, 1, 0));
  CHECK(stoichiometry(net, 3).entries == Eigen::Vector3i(0, 1, -1));
  CHECK_THROWS_AS(stoichiometry(net, 4), IndexError);
}

TEST_CASE("stationary distributions") {
  CHECK((stationary_distribution(chain3()) - Vector::Constant(3, 1.0 / 3.0)).cwiseAbs().maxCoeff() < 1e-14);
  const ReactionNetwork net(2, {{0, 1, 2.0}, {1, 0, 1.0}});
  const Vector pi = stationary_distribution(net);
  CHECK(pi[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(pi[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("noise matrices") {
  const auto net = chain3();
  const Matrix B = noise_matrix(net, NoiseSpec::unit());
  for (std::size_t k = 0; k < 4; ++k)
    CHECK((B.col(static_cast<Eigen::Index>(k)) - stoichiometry(net, k).as_real()).norm() == 0.0);

  const ReactionNetwork pair(2, {{0, 1, 1.0}, {1, 0, 1.0}});
  const Vector s = noise_sigmas(pair, NoiseSpec::stationary_flux(4.0));
  CHECK(s[0] == doctest::Approx(std::sqrt(2.0)));
  CHECK(s[1] == doctest::Approx(std::sqrt(2.0)));

  CHECK_THROWS_AS(noise_sigmas(net, NoiseSpec::explicit_sigmas({1, 1, 1})), SchemaError);
  CHECK_THROWS_AS(noise_sigmas(net, NoiseSpec::explicit_sigmas({1, -1, 1, 1})), SchemaError);
  CHECK_THROWS_AS(noise_sigmas(net, NoiseSpec::stationary_flux(0.0)), SchemaError);
}

TEST_CASE("construction rejects invalid networks") {
  CHECK_THROWS_AS(ReactionNetwork(2, {{0, 0, 1.0}, {0, 1, 1.0}, {1, 0, 1.0}}), SchemaError);
  CHECK_THROWS_AS(ReactionNetwork(2, {{0, 1, 1.0}, {0, 1, 2.0}, {1, 0, 1.0}}), SchemaError);
  CHECK_THROWS_AS(ReactionNetwork(2, {{0, 1, 0.0}, {1, 0, 1.0}}), SchemaError);
  CHECK_THROWS_AS(ReactionNetwork(2, {{0, 1, -1.0}, {1, 0, 1.0}}), SchemaError);
  CHECK_THROWS_AS(ReactionNetwork(2, {{0, 1, std::nan("")}, {1, 0, 1.0}}), SchemaError);
  CHECK_THROWS_AS(ReactionNetwork(2, {{0, 2, 1.0}, {1, 0, 1.0}}), SchemaError);
  CHECK_THROWS_AS(ReactionNetwork(3, {{0, 1, 1.0}, {1, 0, 1.0}, {1, 2, 1.0}}), IrreducibleViolation);
  CHECK_THROWS_AS(ReactionNetwork(2, {{0, 1, 1.0}}), IrreducibleViolation);
}

TEST_CASE("nearly decoupled blocks give a degenerate kernel") {
  const ReactionNetwork net(4, {{0, 1, 1.0}, {1, 0, 1.0}, {2, 3, 1.0}, {3, 2, 1.0}, {1, 2, 1e-20}, {2, 1, 1e-20}});
  CHECK_THROWS_AS(stationary_distribution(net), DegenerateKernel);
}

TEST_CASE("measurement vectors") {
  const std::vector<std::size_t> ones{2};
  const auto M = MeasurementVector::indicator(3, ones);
  CHECK(M.is_binary());
  CHECK(M.values() == Eigen::Vector3d(0, 0, 1));
  CHECK_FALSE(MeasurementVector(Eigen::Vector3d(0, 0.5, 1)).is_binary());
  CHECK(MeasurementVector(Eigen::Vector3d(0, 0.5, 1)).is_unit_interval());
  CHECK_THROWS(MeasurementVector(Eigen::Vector3d(0, std::nan(""), 1)));
}

TEST_CASE("property: Laplacian structure on random networks") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(trial % 15);
    const auto net = testing::random_network(rng, n);
    const Matrix L = build_laplacian(net);
    const double scale = L.cwiseAbs().maxCoeff();
    CHECK(L.colwise().sum().cwiseAbs().maxCoeff() <= 1e-12 * scale);
    for (Eigen::Index i = 0; i < L.rows(); ++i)
      for (Eigen::Index j = 0; j < L.cols(); ++j)
        if (i != j) CHECK(L(i, j) >= 0.0);

    const Vector pi = stationary_distribution(net);
    CHECK((L * pi).cwiseAbs().maxCoeff() <= 1e-12 * scale);
    CHECK(pi.minCoeff() > 0.0);
    CHECK(pi.sum() == doctest::Approx(1.0).epsilon(1e-14));

    const Matrix B = noise_matrix(net, NoiseSpec::stationary_flux(10.0));
    CHECK((B.transpose() * Vector::Ones(L.rows())).cwiseAbs().maxCoeff() <= 1e-12);
    for (std::size_t k = 0; k < net.edge_count(); ++k) {
      const auto z = stoichiometry(net, k).entries;
      CHECK(z.sum() == 0);
      CHECK(z.cwiseAbs().sum() == 2);
    }
  }
}

TEST_CASE("property: symmetric rates rebuild L from stoichiometry") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 3 + static_cast<std::size_t>(trial % 10);
    std::vector<EdgeSpec> edges;
    std::uniform_real_distribution<double> u(0.1, 2.0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double a = u(rng);
      edges.push_back({i, i + 1, a});
      edges.push_back({i + 1, i, a});
    }
    const ReactionNetwork net(n, edges);
    REQUIRE(net.has_symmetric_rates());
    Matrix rebuilt = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    // Each unordered pair appears twice in the edge list, hence the 1/2.
    for (const auto& e : net.edges()) {
      const Vector z = stoichiometry(net, e.index).as_real();
      rebuilt -= 0.5 * e.rate * z * z.transpose();
    }
    CHECK((rebuilt - build_laplacian(net)).cwiseAbs().maxCoeff() <= 1e-14);
  }
}

TEST_CASE("reverse edge lookup") {
  const auto net = chain3();
  CHECK(net.reverse_of(0) == 1);
  CHECK(net.reverse_of(3) == 2);
  const ReactionNetwork cyc(3, {{0, 1, 1.0}, {1, 2, 1.0}, {2, 0, 1.0}});
  CHECK(cyc.reverse_of(0) == cyc.edge_count());
  CHECK_FALSE(cyc.has_symmetric_rates());
}
