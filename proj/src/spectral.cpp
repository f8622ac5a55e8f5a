#include "stoshield/spectral.hpp"

#include "stoshield/errors.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>

namespace stoshield {

namespace {

constexpr double kResidualTol = 1e-8;
constexpr double kBiorthTol = 1e-8;

double matrix_scale(const Matrix& L) {
  const double s = L.cwiseAbs().maxCoeff();
  return s > 0.0 ? s : 1.0;
}

// Parlett–Reinsch balancing with radix-2 scale factors. Returns d such that
// diag(d)^-1 · A · diag(d) has comparable row and column norms.
Vector balance(Matrix& A) {
  const auto n = A.rows();
  Vector d = Vector::Ones(n);
  constexpr double radix = 2.0;
  bool converged = false;
  for (int sweep = 0; sweep < 100 && !converged; ++sweep) {
    converged = true;
    for (Eigen::Index i = 0; i < n; ++i) {
      double c = 0.0, r = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        c += std::abs(A(j, i));
        r += std::abs(A(i, j));
      }
      if (c == 0.0 || r == 0.0) continue;
      double g = r / radix;
      double f = 1.0;
      const double s = c + r;
      while (c < g) {
        f *= radix;
        c *= radix * radix;
      }
      g = r * radix;
      while (c > g) {
        f /= radix;
        c /= radix * radix;
      }
      if ((c + r) / f < 0.95 * s) {
        converged = false;
        d[i] *= f;
        A.row(i) /= f;
        A.col(i) *= f;
      }
    }
  }
  return d;
}

// Canonical phase: the largest-magnitude component becomes real positive.
// Ties on magnitude go to the lowest index.
void canonical_phase(ComplexMatrix& V, ComplexMatrix* W) {
  for (Eigen::Index i = 0; i < V.cols(); ++i) {
    Eigen::Index best = 0;
    double mag = -1.0;
    for (Eigen::Index l = 0; l < V.rows(); ++l) {
      const double a = std::abs(V(l, i));
      if (a > mag * (1.0 + 1e-12)) {
        mag = a;
        best = l;
      }
    }
    if (mag <= 0.0) continue;
    const std::complex<double> phase = std::abs(V(best, i)) / V(best, i);
    V.col(i) *= phase;
    if (W) W->col(i) /= phase;
  }
}

bool lexicographic_less(const ComplexMatrix& V, Eigen::Index a, Eigen::Index b) {
  for (Eigen::Index l = 0; l < V.rows(); ++l) {
    const double ra = V(l, a).real(), rb = V(l, b).real();
    if (std::abs(ra - rb) > 1e-12) return ra < rb;
    const double ia = V(l, a).imag(), ib = V(l, b).imag();
    if (std::abs(ia - ib) > 1e-12) return ia < ib;
  }
  return a < b;
}

// Order: decreasing real part, then decreasing imaginary part; clusters of
// numerically equal eigenvalues are ordered by their eigenvectors.
std::vector<Eigen::Index> spectral_order(const ComplexVector& lambda, const ComplexMatrix& V,
                                         double scale) {
  const auto n = lambda.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const double tie = 1e-10 * scale;
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (lambda[a].real() != lambda[b].real()) return lambda[a].real() > lambda[b].real();
    return lambda[a].imag() > lambda[b].imag();
  });
  std::size_t start = 0;
  while (start < order.size()) {
    std::size_t end = start + 1;
    while (end < order.size() &&
           std::abs(lambda[order[end]] - lambda[order[start]]) <= tie)
      ++end;
    if (end - start > 1)
      std::sort(order.begin() + static_cast<std::ptrdiff_t>(start),
                order.begin() + static_cast<std::ptrdiff_t>(end),
                [&](Eigen::Index a, Eigen::Index b) { return lexicographic_less(V, a, b); });
    start = end;
  }
  return order;
}

std::string cluster_report(const ComplexVector& lambda, double scale) {
  std::ostringstream os;
  os << "eigenvalue cluster {";
  bool first = true;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    for (Eigen::Index j = 0; j < lambda.size(); ++j) {
      if (i != j && std::abs(lambda[i] - lambda[j]) <= 1e-6 * scale) {
        os << (first ? "" : ", ") << lambda[i].real();
        if (lambda[i].imag() != 0.0) os << (lambda[i].imag() > 0 ? "+" : "") << lambda[i].imag() << "i";
        first = false;
        break;
      }
    }
  }
  os << "}";
  return os.str();
}

EigenSystem symmetric_decomposition(const Matrix& L) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(L);
  if (solver.info() != Eigen::Success) throw DefectiveMatrix("self-adjoint eigensolver failed");
  const auto n = L.rows();
  EigenSystem eig;
  eig.symmetric = true;
  ComplexVector lambda = solver.eigenvalues().cast<std::complex<double>>();
  ComplexMatrix V = solver.eigenvectors().cast<std::complex<double>>();
  canonical_phase(V, nullptr);
  const auto order = spectral_order(lambda, V, matrix_scale(L));
  eig.eigenvalues.resize(n);
  eig.right.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    eig.eigenvalues[i] = lambda[order[static_cast<std::size_t>(i)]];
    eig.right.col(i) = V.col(order[static_cast<std::size_t>(i)]);
  }
  eig.left = eig.right;
  return eig;
}

EigenSystem general_decomposition(const Matrix& L) {
  const auto n = L.rows();
  const double scale = matrix_scale(L);
  Matrix balanced = L;
  const Vector d = balance(balanced);

  Eigen::EigenSolver<Matrix> solver(balanced, true);
  if (solver.info() != Eigen::Success) throw DefectiveMatrix("general eigensolver did not converge");
  const ComplexVector lambda = solver.eigenvalues();
  ComplexMatrix Vb = solver.eigenvectors();

  // A Jordan block shows up as a near-coincident eigenvalue pair whose
  // computed eigenvectors are almost parallel (their split is O(sqrt(eps))).
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (std::abs(lambda[i] - lambda[j]) > 1e-6 * scale) continue;
      const double c = std::abs(Vb.col(i).dot(Vb.col(j))) / (Vb.col(i).norm() * Vb.col(j).norm());
      if (c > 1.0 - 1e-8)
        throw DefectiveMatrix("matrix is not diagonalizable within tolerance; " +
                              cluster_report(lambda, scale));
    }

  Eigen::PartialPivLU<ComplexMatrix> lu(Vb);
  if (!(lu.rcond() > 1e-12))
    throw DefectiveMatrix("eigenvector matrix is numerically singular; " +
                          cluster_report(lambda, scale));
  const ComplexMatrix Wb = lu.inverse().transpose();  // column i is w'_i

  // Undo the balancing similarity: v = D v', w = D^-1 w'.
  ComplexMatrix V = d.cast<std::complex<double>>().asDiagonal() * Vb;
  ComplexMatrix W = d.cwiseInverse().cast<std::complex<double>>().asDiagonal() * Wb;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double norm = V.col(i).norm();
    V.col(i) /= norm;
    W.col(i) *= norm;
  }
  canonical_phase(V, &W);

  const auto order = spectral_order(lambda, V, scale);
  EigenSystem eig;
  eig.symmetric = false;
  eig.eigenvalues.resize(n);
  eig.right.resize(n, n);
  eig.left.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto src = order[static_cast<std::size_t>(i)];
    eig.eigenvalues[i] = lambda[src];
    eig.right.col(i) = V.col(src);
    eig.left.col(i) = W.col(src);
  }
  return eig;
}

}  // namespace

EigenDiagnostics diagnose(const Matrix& L, const EigenSystem& eig) {
  // Residuals are measured in the balanced basis diag(d)^-1 L diag(d), where
  // the solver's backward error lives; d = 1 for symmetric input.
  EigenDiagnostics out;
  Matrix Lb = L;
  const Vector d = eig.symmetric ? Vector::Ones(L.rows()) : balance(Lb);
  const double scale = matrix_scale(Lb);
  const ComplexMatrix Lc = L.cast<std::complex<double>>();
  const Eigen::VectorXcd dinv = d.cwiseInverse().cast<std::complex<double>>();
  const Eigen::VectorXcd dc = d.cast<std::complex<double>>();
  const ComplexMatrix R = dinv.asDiagonal() * (Lc * eig.right - eig.right * eig.eigenvalues.asDiagonal());
  const ComplexMatrix Lt = (eig.left.transpose() * Lc - eig.eigenvalues.asDiagonal() * eig.left.transpose()) *
                           dc.asDiagonal();
  for (Eigen::Index i = 0; i < eig.size(); ++i) {
    const double vn = std::max((dinv.asDiagonal() * eig.right.col(i)).norm(), 1e-300);
    const double wn = std::max((dc.asDiagonal() * eig.left.col(i)).norm(), 1e-300);
    out.max_right_residual = std::max(out.max_right_residual, R.col(i).norm() / (scale * vn));
    out.max_left_residual = std::max(out.max_left_residual, Lt.row(i).norm() / (scale * wn));
    out.max_imag_eigenvalue = std::max(out.max_imag_eigenvalue, std::abs(eig.eigenvalues[i].imag()));
  }
  const ComplexMatrix G = eig.left.transpose() * eig.right -
                          ComplexMatrix::Identity(eig.size(), eig.size());
  out.biorthogonality = G.cwiseAbs().maxCoeff();
  return out;
}

EigenSystem eigendecompose(const Matrix& L, bool symmetric_hint) {
  if (L.rows() != L.cols() || L.rows() == 0)
    throw std::invalid_argument("eigendecompose: matrix must be square and non-empty");
  const bool symmetric = symmetric_hint && L.isApprox(L.transpose(), 0.0);
  EigenSystem eig = symmetric ? symmetric_decomposition(L) : general_decomposition(L);

  const auto diag = diagnose(L, eig);
  if (diag.max_right_residual > kResidualTol || diag.max_left_residual > kResidualTol ||
      diag.biorthogonality > kBiorthTol) {
    std::ostringstream os;
    os << "eigen residual checks failed (right " << diag.max_right_residual << ", left "
       << diag.max_left_residual << ", biorthogonality " << diag.biorthogonality << "); "
       << cluster_report(eig.eigenvalues, matrix_scale(L));
    throw DefectiveMatrix(os.str());
  }
  return eig;
}

double spectral_radius(const EigenSystem& eig) {
  return eig.eigenvalues.cwiseAbs().maxCoeff();
}

CovarianceMatrix stationary_covariance_spectral(const EigenSystem& eig, const Matrix& B) {
  const auto n = eig.size();
  if (B.rows() != n) throw std::invalid_argument("noise matrix row count must match L");
  if (n == 1) return Matrix::Zero(1, 1);

  const auto r = n - 1;
  const ComplexVector lambda = eig.eigenvalues.tail(r);
  const double lscale = std::max(eig.eigenvalues.cwiseAbs().maxCoeff(), 1e-300);

  // w_1ᵀB must vanish or the neutral mode would accumulate variance.
  const double leak = (eig.left.col(0).transpose() * B.cast<std::complex<double>>()).cwiseAbs().maxCoeff();
  const double bscale = std::max(B.cwiseAbs().maxCoeff(), 1e-300);
  if (leak > 1e-8 * bscale * std::max(1.0, eig.left.col(0).norm()))
    throw std::invalid_argument("noise columns are not orthogonal to the left null vector");

  ComplexMatrix G(r, r);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < r; ++j) {
      const std::complex<double> s = lambda[i] + lambda[j];
      if (std::abs(s) <= 1e-13 * lscale)
        throw SpectralSingularity("lambda_i + lambda_j vanishes for non-neutral modes");
      G(i, j) = -1.0 / s;
    }

  const ComplexMatrix Wc = eig.left.rightCols(r);
  const ComplexMatrix Vc = eig.right.rightCols(r);
  const ComplexMatrix WB = Wc.transpose() * B.cast<std::complex<double>>();  // r×m
  const ComplexMatrix P = WB * WB.transpose();
  const ComplexMatrix H = G.cwiseProduct(P);
  const ComplexMatrix S = Vc * H * Vc.transpose();

  const double real_scale = std::max(S.real().cwiseAbs().maxCoeff(), 1e-300);
  if (S.imag().cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, real_scale))
    throw NumericalError("spectral covariance has a non-negligible imaginary part");
  Matrix out = S.real();
  return 0.5 * (out + out.transpose());
}

CovarianceMatrix lyapunov_oracle(const Matrix& L, const Matrix& B) {
  const auto n = L.rows();
  if (L.cols() != n || B.rows() != n) throw std::invalid_argument("lyapunov_oracle: shape mismatch");
  if (n > 48) throw std::invalid_argument("lyapunov_oracle: limited to n <= 48");
  if (n == 1) return Matrix::Zero(1, 1);

  // Orthonormal basis of 1^⊥ from a Householder QR of the ones vector.
  Eigen::HouseholderQR<Matrix> qr(Matrix::Ones(n, 1));
  const Matrix Q = qr.householderQ() * Matrix::Identity(n, n);
  const Matrix P = Q.rightCols(n - 1);

  const auto r = n - 1;
  const Matrix Lr = P.transpose() * L * P;
  const Matrix Qr = P.transpose() * (B * B.transpose()) * P;

  // vec(Lr S + S Lrᵀ) = (I ⊗ Lr + Lr ⊗ I) vec(S), column-major vec.
  Matrix K = Matrix::Zero(r * r, r * r);
  for (Eigen::Index a = 0; a < r; ++a) {
    K.block(a * r, a * r, r, r) += Lr;
    for (Eigen::Index b = 0; b < r; ++b)
      K.block(a * r, b * r, r, r).diagonal().array() += Lr(a, b);
  }
  Eigen::Map<const Vector> rhs(Qr.data(), r * r);
  Eigen::FullPivLU<Matrix> lu(K);
  if (!lu.isInvertible() || lu.rcond() < 1e-14)
    throw SpectralSingularity("deflated Lyapunov operator is singular");
  const Vector s = lu.solve(-rhs);
  const Matrix S = Eigen::Map<const Matrix>(s.data(), r, r);
  Matrix out = P * S * P.transpose();
  return 0.5 * (out + out.transpose());
}

}  // namespace stoshield
