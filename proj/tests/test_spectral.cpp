#include "stoshield/channels.hpp"
#include "stoshield/ensembles.hpp"
#include "stoshield/errors.hpp"
#include "stoshield/spectral.hpp"

#include "support.hpp"

#include <doctest.h>

#include <complex>

using namespace stoshield;

namespace {

// Faddeev–LeVerrier: coefficients c with det(λI − A) = Σ c_k λ^(n−k), c_0 = 1.
std::vector<double> char_poly(const Matrix& A) {
  const auto n = A.rows();
  std::vector<double> c(static_cast<std::size_t>(n) + 1, 0.0);
  c[0] = 1.0;
  Matrix Mk = Matrix::Zero(n, n);
  for (Eigen::Index k = 1; k <= n; ++k) {
    Mk = A * Mk + c[static_cast<std::size_t>(k - 1)] * Matrix::Identity(n, n);
    c[static_cast<std::size_t>(k)] = -(A * Mk).trace() / static_cast<double>(k);
  }
  return c;
}

std::complex<double> eval_poly(const std::vector<double>& c, std::complex<double> x) {
  std::complex<double> acc = 0.0;
  for (double ck : c) acc = acc * x + ck;
  return acc;
}

ReactionNetwork chain3() { return ReactionNetwork(3, {{0, 1, 1.0}, {1, 0, 1.0}, {1, 2, 1.0}, {2, 1, 1.0}}); }

}  // namespace

TEST_CASE("three-state spectrum is {0, -1, -3}") {
  const Matrix L = build_laplacian(chain3());
  const auto c = char_poly(L);
  for (double root : {0.0, -1.0, -3.0}) CHECK(std::abs(eval_poly(c, root)) < 1e-12);
  for (bool hint : {true, false}) {
    const auto eig = eigendecompose(L, hint);
    CHECK(eig.symmetric == hint);
    CHECK(std::abs(eig.eigenvalues[0]) < 1e-12);
    CHECK(std::abs(eig.eigenvalues[1] - (-1.0)) < 1e-12);
    CHECK(std::abs(eig.eigenvalues[2] - (-3.0)) < 1e-12);
  }
}

TEST_CASE("two-state eigenvectors") {
  const ReactionNetwork net(2, {{0, 1, 1.0}, {1, 0, 1.0}});
  const auto eig = eigendecompose(build_laplacian(net), true);
  CHECK(std::abs(eig.eigenvalues[1] - (-2.0)) < 1e-14);
  const double r = 1.0 / std::sqrt(2.0);
  CHECK(std::abs(std::abs(eig.right(0, 1)) - r) < 1e-14);
  CHECK(std::abs(eig.right(0, 1) + eig.right(1, 1)) < 1e-14);
}

TEST_CASE("potassium spectrum at -65 mV is real and non-positive") {
  const auto ch = build_channel(ChannelKind::K, -65.0);
  const Matrix L = build_laplacian(ch.network);
  const auto eig = eigendecompose(L, false);
  CHECK(std::abs(eig.eigenvalues[0]) < 1e-12);
  for (Eigen::Index i = 1; i < 5; ++i) {
    CHECK(std::abs(eig.eigenvalues[i].imag()) < 1e-12);
    CHECK(eig.eigenvalues[i].real() < 0.0);
  }
  // Left null vector is proportional to 1.
  const ComplexVector w = eig.left.col(0) / eig.left(0, 0);
  CHECK((w - ComplexVector::Ones(5)).cwiseAbs().maxCoeff() < 1e-10);
  // Eigenvalue residuals against the characteristic polynomial.
  const auto c = char_poly(L);
  for (Eigen::Index i = 0; i < 5; ++i) CHECK(std::abs(eval_poly(c, eig.eigenvalues[i])) < 1e-8);
}

TEST_CASE("property: biorthogonal eigensystems of random networks") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 80; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(trial % 18);
    const auto net = testing::random_network(rng, n);
    const Matrix L = build_laplacian(net);
    const auto eig = eigendecompose(L, false);
    const auto d = diagnose(L, eig);
    CHECK(d.biorthogonality <= 1e-8);
    CHECK(d.max_right_residual <= 1e-8);
    CHECK(d.max_left_residual <= 1e-8);
    CHECK(std::abs(eig.eigenvalues[0]) <= 1e-10 * L.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 1; i < eig.size(); ++i) {
      CHECK(eig.eigenvalues[i].real() < 0.0);
      CHECK(eig.eigenvalues[i - 1].real() >= eig.eigenvalues[i].real());
    }
    // Raw WᵀV against the identity, independently of diagnose().
    const ComplexMatrix G = eig.left.transpose() * eig.right;
    CHECK((G - ComplexMatrix::Identity(eig.size(), eig.size())).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("symmetric networks have real spectra") {
  for (std::size_t s = 0; s < 10; ++s) {
    const auto net = sample_er(ERConfig{12, 0.4, 3, 1, 1}, s).network;
    const auto eig = eigendecompose(build_laplacian(net), true);
    CHECK(eig.eigenvalues.imag().cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((eig.left - eig.right).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("Jordan block is reported as defective") {
  // A directed 3-cycle with rates 1, 1, 4 has the double eigenvalue -3.
  const ReactionNetwork net(3, {{0, 1, 1.0}, {1, 2, 1.0}, {2, 0, 4.0}});
  const Matrix L = build_laplacian(net);
  const auto c = char_poly(L);
  CHECK(std::abs(eval_poly(c, -3.0)) < 1e-12);
  CHECK_THROWS_AS(eigendecompose(L, false), DefectiveMatrix);
}

TEST_CASE("covariance fixtures") {
  const ReactionNetwork pair(2, {{0, 1, 1.0}, {1, 0, 1.0}});
  const Matrix B2 = noise_matrix(pair, NoiseSpec::unit());
  Matrix expected(2, 2);
  expected << 0.5, -0.5,
             -0.5, 0.5;
  const auto eig2 = eigendecompose(build_laplacian(pair), true);
  CHECK((stationary_covariance_spectral(eig2, B2) - expected).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((lyapunov_oracle(build_laplacian(pair), B2) - expected).cwiseAbs().maxCoeff() < 1e-14);

  const auto net = chain3();
  const Matrix L = build_laplacian(net);
  const Matrix B = noise_matrix(net, NoiseSpec::unit());
  const Matrix S = stationary_covariance_spectral(eigendecompose(L, true), B);
  CHECK(S(2, 2) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK((S * Vector::Ones(3)).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((S - lyapunov_oracle(L, B)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(stationary_covariance_spectral(eigendecompose(L, true), Matrix::Zero(3, 4)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("property: spectral covariance equals the Lyapunov oracle") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(trial % 14);
    const auto net = testing::random_network(rng, n);
    const Matrix L = build_laplacian(net);
    const Matrix B = noise_matrix(net, NoiseSpec::stationary_flux(25.0));
    const Matrix S = stationary_covariance_spectral(eigendecompose(L, false), B);
    const Matrix O = lyapunov_oracle(L, B);
    CHECK((S - O).norm() <= 1e-7 * O.norm());
    // Lyapunov residual, symmetry, positive semidefiniteness.
    CHECK((L * S + S * L.transpose() + B * B.transpose()).norm() <= 1e-9 * (B * B.transpose()).norm());
    CHECK((S - S.transpose()).cwiseAbs().maxCoeff() == 0.0);
    Eigen::SelfAdjointEigenSolver<Matrix> es(S);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10 * es.eigenvalues().cwiseAbs().maxCoeff());
  }
}

TEST_CASE("spectral radius") {
  CHECK(spectral_radius(eigendecompose(build_laplacian(chain3()), true)) == doctest::Approx(3.0));
}
