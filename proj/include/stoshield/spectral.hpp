#pragma once

#include "stoshield/reaction_graph.hpp"

#include <Eigen/Dense>

namespace stoshield {

using ComplexVector = Eigen::VectorXcd;
using ComplexMatrix = Eigen::MatrixXcd;
using CovarianceMatrix = Matrix;

/// Biorthogonal eigensystem of a Laplacian.
///
/// Eigenvalues are sorted by decreasing real part, so index 0 is the neutral
/// mode. Column i of `right` is v_i with ‖v_i‖₂ = 1; column i of `left` is
/// w_i scaled so that w_iᵀv_j = δ_ij (plain transpose, no conjugation).
/// When `symmetric` is set the vectors are real and left == right.
struct EigenSystem {
  ComplexVector eigenvalues;
  ComplexMatrix right;
  ComplexMatrix left;
  bool symmetric = false;

  Eigen::Index size() const noexcept { return eigenvalues.size(); }
};

/// Residual and biorthogonality diagnostics for an EigenSystem. Residuals
/// are relative backward errors in the balanced basis D⁻¹LD used by the
/// general solver (D = I for symmetric systems).
struct EigenDiagnostics {
  double max_right_residual = 0.0;  ///< max_i ‖D⁻¹(L v_i − λ_i v_i)‖ / (‖D⁻¹LD‖ ‖D⁻¹v_i‖)
  double max_left_residual = 0.0;   ///< max_i ‖(w_iᵀL − λ_i w_iᵀ)D‖ / (‖D⁻¹LD‖ ‖Dw_i‖)
  double biorthogonality = 0.0;     ///< max |WᵀV − I|
  double max_imag_eigenvalue = 0.0;
};

/// Eigendecomposition of L. A symmetric hint on a symmetric matrix takes
/// the self-adjoint solver; otherwise the matrix is balanced and solved with
/// the general real solver, and left vectors come from inverting the right
/// eigenvector matrix.
///
/// Throws DefectiveMatrix when near-coincident eigenvalues carry nearly
/// parallel eigenvectors, the eigenvector matrix is numerically singular, or
/// the residual and biorthogonality checks (1e-8) fail.
EigenSystem eigendecompose(const Matrix& L, bool symmetric_hint);

EigenDiagnostics diagnose(const Matrix& L, const EigenSystem& eig);

/// Stationary covariance Σ = Σ_{i,j≥2} −1/(λ_i+λ_j) v_i (w_iᵀ BBᵀ w_j) v_jᵀ.
CovarianceMatrix stationary_covariance_spectral(const EigenSystem& eig, const Matrix& B);

/// Independent solve of LΣ + ΣLᵀ + BBᵀ = 0 restricted to 1^⊥.
///
/// Deflates the neutral mode with an orthonormal basis P of 1^⊥, solves the
/// vectorized (n−1)² system for PᵀΣP by dense LU and embeds the result.
/// Limited to n ≤ 48 states.
CovarianceMatrix lyapunov_oracle(const Matrix& L, const Matrix& B);

/// Largest |λ| over the spectrum.
double spectral_radius(const EigenSystem& eig);

}  // namespace stoshield
