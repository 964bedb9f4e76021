#pragma once

#include <optional>

#include "orim/linalg.hpp"
#include "orim/linear_operator.hpp"

namespace orim {

// Symmetric PSD operator for the prior second moment S = Γ + μμᵀ.  The
// algorithms only ever need products with S, its trace, a factor L with
// L Lᵀ = S, and (for small problems) a dense copy.
class SymmetricOperator {
 public:
  static SymmetricOperator identity(Index n);
  /// S = diag(d) + u uᵀ, d >= 0 entrywise.
  static SymmetricOperator diag_plus_rank1(Vector d, Vector u);
  /// Dense S; the symmetric eigendecomposition is taken once for the factor.
  static SymmetricOperator from_dense(Matrix s);

  Index size() const { return n_; }
  Vector apply(const Vector& x) const;
  Matrix apply(const Matrix& x) const;
  Vector apply_basis(Index j) const;
  double trace() const;
  Matrix dense() const;
  bool is_identity() const { return kind_ == Kind::Identity; }

  /// L with L Lᵀ = S (n x q); columns need not be independent.
  LinearOperator factor() const;
  /// Smallest eigenvalue over largest (dense kind only; 1 otherwise).
  double relative_rank_gap() const { return rank_gap_; }

  const Vector* diag_part() const { return kind_ == Kind::DiagRank1 ? &d_ : nullptr; }
  const Vector* rank1_part() const { return kind_ == Kind::DiagRank1 ? &u_ : nullptr; }

 private:
  enum class Kind { Identity, DiagRank1, Dense };
  Kind kind_ = Kind::Identity;
  Index n_ = 0;
  Vector d_;       // DiagRank1
  Vector u_;       // DiagRank1
  Matrix dense_;   // Dense
  Matrix factor_;  // Dense: U sqrt(max(Λ,0))
  double rank_gap_ = 1.0;
};

struct PriorModel {
  Vector mean;                               // μ_ξ
  SymmetricOperator second_moment;           // S = Γ + μμᵀ
  std::optional<Matrix> factor;              // explicit M with M Mᵀ = S
  std::optional<LinearOperator> cov_factor;  // C with C Cᵀ = Γ, for sampling

  Index size() const { return mean.size(); }
};

/// Zero-mean, identity-covariance prior (S = I).
PriorModel identity_prior(Index n);

/// S = cov + mean meanᵀ; checks symmetry, positive semidefiniteness and full
/// rank of S.  The explicit factor is left absent.
PriorModel prior_from_mean_cov(const Vector& mean, const Matrix& cov);

/// Prior carrying the explicit factor M = [M_xi mean]; S = M Mᵀ.
PriorModel prior_from_factor(const Vector& mean, const Matrix& m_xi);

LinearOperator zero_initial_inverse(Index n, Index m);

struct InverseProblem {
  LinearOperator forward;          // A: m x n
  double eta = 0.0;                // noise std dev / regularization weight
  PriorModel prior;                // n-dimensional
  LinearOperator initial_inverse;  // P: n x m

  Index data_size() const { return forward.rows(); }      // m
  Index solution_size() const { return forward.cols(); }  // n
  /// n > m: outside the regime the closed-form theory states; allowed, flagged.
  bool transposed_regime() const { return solution_size() > data_size(); }
  void validate(Index requested_rank = -1) const;
};

InverseProblem make_problem(LinearOperator forward, double eta, PriorModel prior,
                            std::optional<LinearOperator> initial_inverse = std::nullopt);

struct LowRankMatrix {
  Matrix X;  // n x r, orthonormal columns
  Matrix Y;  // m x r

  Index rank() const { return X.cols(); }
  Index rows() const { return X.rows(); }
  Index cols() const { return Y.rows(); }
  Vector apply(const Vector& b) const { return X * (Y.transpose() * b); }
  Vector apply_transpose(const Vector& v) const { return Y * (X.transpose() * v); }
  Matrix to_dense() const { return X * Y.transpose(); }
  void append(const Vector& x, const Vector& y);

  static LowRankMatrix zero(Index n, Index m) { return LowRankMatrix{Matrix(n, 0), Matrix(m, 0)}; }
};

struct ClosedFormIntermediates {
  Matrix F;        // n x m: (I - PA) S Aᵀ - η² P
  Matrix G;        // m x m: A S Aᵀ + η² I
  Matrix H;        // n x n: F G⁻¹ Fᵀ, symmetrized
  EigResult eig;   // of H
  Matrix Ginv_Ft;  // m x n, reused when slicing different ranks
  Index rank_F = 0;
};

}  // namespace orim
