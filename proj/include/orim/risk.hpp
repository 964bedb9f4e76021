#pragma once

#include <memory>

#include "orim/model.hpp"

namespace orim {

// Products every risk evaluation and update step needs: G y = (A S Aᵀ + η²I) y,
// A S x, S Aᵀ y.  A dense G with its Cholesky factorization is built when the
// problem is small enough; the rank-update loop then solves with the same
// factorization throughout.
struct ProblemKernels {
  LinearOperator A;
  LinearOperator P;
  SymmetricOperator S;
  double eta = 0.0;

  LinearOperator S_factor;             // L with L Lᵀ = S

  std::shared_ptr<const Matrix> G;     // dense A S Aᵀ + η² I, optional
  std::shared_ptr<const SpdFactorization> G_chol;
  std::shared_ptr<const Matrix> SAt;   // dense S Aᵀ, optional

  Vector apply_G(const Vector& y) const;
  Vector apply_AS(const Vector& x) const;
  Vector apply_SAt(const Vector& y) const;
  bool has_dense_G() const { return G_chol != nullptr; }
};

ProblemKernels make_kernels(const InverseProblem& problem, bool want_dense_g = true,
                            Index dense_limit = 3000);

/// f(Z) = tr((P+Z) G (P+Z)ᵀ) - 2 tr((P+Z) A S) + tr(S), the Bayes risk.
double bayes_risk(const InverseProblem& problem, const Matrix& z,
                  const ProblemKernels* kernels = nullptr);
double bayes_risk(const InverseProblem& problem, const LowRankMatrix& z,
                  const ProblemKernels* kernels = nullptr);

/// f(0) = ||(I - PA)M||_F² + η²||P||_F², evaluated without forming M.
double risk_of_zero(const InverseProblem& problem, const ProblemKernels* kernels = nullptr);

struct RiskCache {
  double f_current = 0.0;
  Index r_current = 0;
  Matrix X_hist;  // accepted x columns; orthonormality is a precondition below
  std::shared_ptr<const ProblemKernels> kernels;
};

RiskCache make_risk_cache(const InverseProblem& problem);
RiskCache make_risk_cache(std::shared_ptr<const ProblemKernels> kernels, double f0);

/// Rank-1 risk update f += yᵀG(y + 2Pᵀx) - 2yᵀASx; requires ||x|| = 1 and
/// x ⟂ previously accepted columns.
double incremental_risk(RiskCache& cache, const InverseProblem& problem, const Vector& x,
                        const Vector& y);

/// Empirical mean of ||(P+Z)(Aξ+δ) - ξ||² over Gaussian draws; statistical oracle.
double monte_carlo_risk(const InverseProblem& problem, const Matrix& z, int samples,
                        std::uint64_t seed);
double monte_carlo_risk(const InverseProblem& problem, const LowRankMatrix& z, int samples,
                        std::uint64_t seed);

}  // namespace orim
