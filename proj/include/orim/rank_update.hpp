#pragma once

#include <limits>
#include <vector>

#include "orim/risk.hpp"

namespace orim {

enum class YSolver { automatic, lsqr, dense };
enum class InitStrategy { ones, random_orthogonal };
enum class StopReason { tolerance, rank_cap, inner_failure };

struct UpdateConfig {
  double outer_tol = 1e-6;     // stop when f(Z_{r-1}) - f(Z_r) < tol * f(Z_r)
  Index outer_max_rank = 50;
  double inner_tol = 1e-6;     // alternating sweeps: f improvement OR argument change
  int inner_max_iter = 100;
  double lsqr_tol = 1e-10;
  int lsqr_max_iter = 0;       // 0: 4 * max(m, n)
  InitStrategy init = InitStrategy::random_orthogonal;
  std::uint64_t seed = 0;
  YSolver y_solver = YSolver::automatic;
  Index dense_g_limit = 3000;  // automatic: build dense G + Cholesky up to this m
};

struct UpdateStep {
  Index rank = 0;
  double f = 0.0;
  int inner_iterations = 0;
  double wall_ms = 0.0;
};

struct UpdateTrace {
  double f0 = 0.0;
  std::vector<UpdateStep> steps;
  StopReason reason = StopReason::rank_cap;
  // improvement of the discarded final pair when stopping on tolerance
  double stopping_improvement = std::numeric_limits<double>::quiet_NaN();
};

struct UpdateResult {
  LowRankMatrix Z;
  UpdateTrace trace;
};

/// Rank-1 update loop: accumulates Z_r = X_r Y_rᵀ until the relative risk
/// improvement drops below outer_tol or the rank cap is reached.
UpdateResult orim_update(const InverseProblem& problem, const UpdateConfig& config);

struct RankOnePair {
  Vector x;
  Vector y;
  int sweeps = 0;
  std::vector<double> delta_f;  // risk change vs. the current Z after each sweep
};

/// Alternating-direction solver for the rank-1 subproblem; returns x with
/// ||x|| = 1 and x ⟂ X_r.  f_current is the risk of the current Z, used by
/// the relative-improvement stopping rule.
RankOnePair rank_one_alternating(const InverseProblem& problem, const Matrix& x_r, const Matrix& y_r,
                                 const UpdateConfig& config);
RankOnePair rank_one_alternating(const ProblemKernels& kernels, const Matrix& x_r, const Matrix& y_r,
                                 const UpdateConfig& config, Rng& rng, double f_current);

/// Exact minimizer over x with y fixed:
/// x̂ = [S Aᵀ y - (P + X_r Y_rᵀ) G y] / (yᵀ G y).
Vector solve_x(const InverseProblem& problem, const Matrix& x_r, const Matrix& y_r, const Vector& y);
Vector solve_x(const ProblemKernels& kernels, const Matrix& x_r, const Matrix& y_r, const Vector& y);

/// Exact minimizer over y with unit x ⟂ X_r fixed: ŷ = G⁻¹ A S x - Pᵀ x,
/// via LSQR on the stacked least-squares form or the dense factorization.
Vector solve_y(const InverseProblem& problem, const Vector& x);
Vector solve_y(const ProblemKernels& kernels, const Vector& x, const UpdateConfig& config);

}  // namespace orim
