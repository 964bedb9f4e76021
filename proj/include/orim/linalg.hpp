#pragma once

#include <Eigen/Cholesky>

#include "orim/linear_operator.hpp"
#include "orim/types.hpp"

namespace orim {

struct SvdResult {
  Matrix U;                // m x m orthogonal
  Vector singular_values;  // min(m,n), nonincreasing
  Matrix V;                // n x n orthogonal
};

struct TruncatedSvd {
  Matrix U;      // m x r
  Vector sigma;  // r
  Matrix V;      // n x r
  Matrix reconstruct() const { return U * sigma.asDiagonal() * V.transpose(); }
};

struct EigResult {
  Matrix U;           // n x n orthogonal
  Vector eigenvalues; // nonincreasing
};

struct Bidiagonalization {
  Matrix Q;       // n x k, orthonormal columns
  Matrix W;       // m x (k+1), orthonormal columns
  Vector alphas;  // k
  Vector betas;   // k+1, betas(0) = ||b||
  bool breakdown = false;

  Index steps() const { return alphas.size(); }
  /// The (k+1) x k lower-bidiagonal matrix of the recurrence A Q = W B.
  Matrix bidiagonal() const;
};

struct LsqrResult {
  Vector solution;
  int iterations = 0;
  bool converged = false;
};

SvdResult svd(const Matrix& a);
TruncatedSvd truncated_svd(const Matrix& a, Index r);
Matrix pseudoinverse(const Matrix& a, double tol = 1e-12);
EigResult symmetric_eig(const Matrix& h);

/// min ||C y - d||_2; stops once ||Cᵀ(Cy-d)|| <= tol ||Cᵀd||.
LsqrResult lsqr(const LinearOperator& c, const Vector& d, double tol, int max_iter);

/// Lower bidiagonalization of (b, A) with full reorthogonalization.
Bidiagonalization golub_kahan(const LinearOperator& a, const Vector& b, Index k);

/// Cholesky factorization of an SPD matrix, reusable across right-hand sides.
class SpdFactorization {
 public:
  explicit SpdFactorization(const Matrix& g);
  Vector solve(const Vector& rhs) const;
  Matrix solve(const Matrix& rhs) const;
  Index size() const { return llt_.matrixLLT().rows(); }
  /// Lower-triangular factor L with G = L Lᵀ.
  Matrix factor() const { return llt_.matrixL(); }
  /// X L without forming L; tr(X G Xᵀ) = ||X L||_F².
  Matrix right_multiply_factor(const Matrix& x) const {
    return x * llt_.matrixLLT().triangularView<Eigen::Lower>();
  }

 private:
  Eigen::LLT<Matrix> llt_;
};

Matrix spd_solve(const Matrix& g, const Matrix& rhs);

/// #{sigma_i > max(dims) * eps * sigma_1}, the conventional numerical rank.
Index numerical_rank(const Vector& singular_values, Index rows, Index cols);

}  // namespace orim
