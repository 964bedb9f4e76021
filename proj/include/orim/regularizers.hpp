#pragma once

#include <optional>

#include "orim/model.hpp"

namespace orim {

enum class InverseKind { tsvd, tikhonov, truncated_tikhonov, orim0, orim_closed_form, golub_kahan_lsqr };

/// Z = V diag(filter) Uᵀ with U, V singular-vector blocks of the operator.
struct SpectralRep {
  Matrix U;       // m x r
  Vector filter;  // r
  Matrix V;       // n x r
};

/// Z = Q B† Wᵀ from a partial bidiagonalization.
struct GkRep {
  Matrix Q;       // n x k
  Matrix B;       // (k+1) x k lower bidiagonal
  Matrix W;       // m x (k+1)
  Matrix B_pinv;  // k x (k+1)
  bool breakdown = false;
};

struct RegularizedInverse {
  InverseKind kind = InverseKind::tikhonov;
  bool unique = true;

  std::optional<Matrix> dense;
  std::optional<SpectralRep> spectral;
  std::optional<LowRankMatrix> low_rank;
  std::optional<GkRep> gk;

  Index rows() const;  // n
  Index cols() const;  // m
  Vector apply(const Vector& b) const;
  Vector apply_transpose(const Vector& v) const;
  Matrix to_dense() const;
  LinearOperator as_operator() const;
};

struct FtResult {
  Matrix Z;
  bool unique = true;
};

/// min_{rank(Z)<=r} ||Z C - B||_F via Ẑ = (B V_{C,k} V_{C,k}ᵀ)_r C†.
FtResult friedland_torokhti(const Matrix& b, const Matrix& c, Index r);

struct ClosedFormOrim {
  LowRankMatrix Z;
  bool unique = true;
  ClosedFormIntermediates intermediates;
};

/// Builds F = (I - PA) S Aᵀ - η²P, G = A S Aᵀ + η²I, H = F G⁻¹ Fᵀ and its
/// eigendecomposition; reusable across ranks.
ClosedFormIntermediates orim_intermediates(const InverseProblem& problem);

struct RankSlice {
  LowRankMatrix Z;
  bool unique = true;
};
RankSlice orim_from_intermediates(const ClosedFormIntermediates& im, Index r);

/// Closed-form rank-r minimizer Ẑ = U_{H,r} U_{H,r}ᵀ F G⁻¹ of the Bayes risk.
ClosedFormOrim orim_closed_form(const InverseProblem& problem, Index r);

RegularizedInverse tsvd_inverse(const Matrix& a, Index r);
RegularizedInverse truncated_tikhonov(const Matrix& a, Index r, double eta);
RegularizedInverse tikhonov_inverse(const Matrix& a, double eta);
/// Closed-form minimizer with P = 0, zero mean and covariance M_xi M_xiᵀ.
RegularizedInverse orim0_inverse(const Matrix& a, const Matrix& m_xi, double eta, Index r);

struct ExtendedSvd {
  Vector D;    // m, singular values of [A ηI]
  Matrix U;    // m x m (= U_A)
  Matrix V11;  // n x m
  Matrix V21;  // m x m
};

/// SVD blocks of [A ηI_m] expressed through the SVD of A.
ExtendedSvd extended_svd(const Matrix& a, double eta);

/// P = Q B† Wᵀ; applying to the generating b reproduces the k-th LSQR iterate.
RegularizedInverse golub_kahan_inverse(const LinearOperator& a, const Vector& b, Index k);

}  // namespace orim
