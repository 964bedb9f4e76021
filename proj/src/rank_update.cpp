#include "orim/rank_update.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace orim {

namespace {

double now_ms() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double, std::milli>(clock::now().time_since_epoch()).count();
}

Vector project_out(const Matrix& basis, Vector v) {
  if (basis.cols() == 0) return v;
  v -= basis * (basis.transpose() * v);
  v -= basis * (basis.transpose() * v);
  return v;
}

// risk change of adding x yᵀ on top of the current Z (x unit, x ⟂ X_r)
double risk_delta(const ProblemKernels& k, const Vector& x, const Vector& y) {
  const Vector ptx = k.P.is_zero() ? Vector(Vector::Zero(y.size())) : k.P.apply_transpose(x);
  return y.dot(k.apply_G(y + 2.0 * ptx)) - 2.0 * y.dot(k.apply_AS(x));
}

Vector init_y(const ProblemKernels& k, const Matrix& y_r, const UpdateConfig& config, Rng& rng) {
  const Index m = k.A.rows();
  if (config.init == InitStrategy::ones) return Vector::Ones(m);
  Vector g = gaussian_vector(m, rng);
  if (y_r.cols() > 0) g -= y_r * (y_r.transpose() * g);
  return g;
}

}  // namespace

Vector solve_x(const ProblemKernels& k, const Matrix& x_r, const Matrix& y_r, const Vector& y) {
  if (y.size() != k.A.rows()) throw std::invalid_argument("solve_x: y size mismatch");
  const Vector gy = k.apply_G(y);
  const double t = y.dot(gy);
  if (!(t > 0.0)) throw std::runtime_error("solve_x: yᵀGy is not positive");
  Vector num = k.apply_SAt(y);
  if (!k.P.is_zero()) num -= k.P.apply(gy);
  if (x_r.cols() > 0) num -= x_r * (y_r.transpose() * gy);
  return num / t;
}

Vector solve_x(const InverseProblem& problem, const Matrix& x_r, const Matrix& y_r, const Vector& y) {
  return solve_x(make_kernels(problem, false), x_r, y_r, y);
}

Vector solve_y(const ProblemKernels& k, const Vector& x, const UpdateConfig& config) {
  if (x.size() != k.A.cols()) throw std::invalid_argument("solve_y: x size mismatch");
  const Vector ptx = k.P.is_zero() ? Vector(Vector::Zero(k.A.rows())) : k.P.apply_transpose(x);

  const bool want_dense = config.y_solver == YSolver::dense ||
                          (config.y_solver == YSolver::automatic && k.has_dense_G());
  if (want_dense) {
    if (!k.has_dense_G()) throw std::runtime_error("solve_y: dense route requested but G unavailable");
    return k.G_chol->solve(k.apply_AS(x)) - ptx;
  }

  // stacked least-squares form: min_y ||[Lᵀ Aᵀ; η I] y - [Lᵀ(x - AᵀPᵀx); -η Pᵀx]||
  const LinearOperator& l = k.S_factor;
  const Index m = k.A.rows();
  const Index q = l.cols();
  const double eta = k.eta;
  const LinearOperator& a = k.A;
  LinearOperator stacked(
      q + m, m,
      [&l, &a, eta, q, m](const Vector& y) -> Vector {
        Vector out(q + m);
        out.head(q) = l.apply_transpose(a.apply_transpose(y));
        out.tail(m) = eta * y;
        return out;
      },
      [&l, &a, eta, q, m](const Vector& u) -> Vector {
        return a.apply(l.apply(u.head(q))) + eta * u.tail(m);
      });

  Vector rhs(q + m);
  rhs.head(q) = l.apply_transpose(x - a.apply_transpose(ptx));
  rhs.tail(m) = -eta * ptx;

  const int max_iter = config.lsqr_max_iter > 0
                           ? config.lsqr_max_iter
                           : static_cast<int>(4 * std::max<Index>(q + m, m));
  auto result = lsqr(stacked, rhs, config.lsqr_tol, max_iter);
  if (!result.converged) {
    if (k.has_dense_G()) return k.G_chol->solve(k.apply_AS(x)) - ptx;
    throw std::runtime_error("solve_y: LSQR did not converge and no dense fallback is available");
  }
  return result.solution;
}

Vector solve_y(const InverseProblem& problem, const Vector& x) {
  return solve_y(make_kernels(problem), x, UpdateConfig{});
}

RankOnePair rank_one_alternating(const ProblemKernels& k, const Matrix& x_r, const Matrix& y_r,
                                 const UpdateConfig& config, Rng& rng, double f_current) {
  constexpr int kMaxRetries = 5;
  const bool dense_route = config.y_solver != YSolver::lsqr && k.has_dense_G();
  const bool p_zero = k.P.is_zero();

  for (int attempt = 0; attempt <= kMaxRetries; ++attempt) {
    Vector y = attempt == 0 ? init_y(k, y_r, config, rng) : gaussian_vector(k.A.rows(), rng);
    RankOnePair pair;
    Vector x_prev, y_prev;
    Vector gy;
    bool gy_valid = false;
    bool degenerate = false;

    for (int it = 1; it <= config.inner_max_iter; ++it) {
      // x-step: x̂ = [S Aᵀy - (P + X Yᵀ) G y] / (yᵀ G y)
      if (!gy_valid) gy = k.apply_G(y);
      const double t = y.dot(gy);
      if (!(t > 0.0)) throw std::runtime_error("rank_one_alternating: yᵀGy is not positive");
      Vector xhat = k.apply_SAt(y);
      if (!p_zero) xhat -= k.P.apply(gy);
      if (x_r.cols() > 0) xhat -= x_r * (y_r.transpose() * gy);
      xhat /= t;

      const double pre_norm = xhat.norm();
      xhat = project_out(x_r, std::move(xhat));
      const double post_norm = xhat.norm();
      if (post_norm <= 1e-12 * std::max(pre_norm, 1e-300) || post_norm == 0.0) {
        degenerate = true;
        break;
      }
      const Vector x = xhat / post_norm;

      // y-step and the risk change of the candidate pair.  On the dense route
      // ŷ = G⁻¹u - v with u = ASx, v = Pᵀx, so Gŷ = u - Gv comes for free and
      // δf = ŷᵀGv - ŷᵀu.
      double delta;
      if (dense_route) {
        const Vector u = k.apply_AS(x);
        const Vector v = p_zero ? Vector() : Vector(k.P.apply_transpose(x));
        y = k.G_chol->solve(u);
        if (!p_zero) y -= v;
        if (p_zero) {
          gy = u;
          delta = -y.dot(u);
        } else {
          const Vector gv = k.apply_G(v);
          gy = u - gv;
          delta = y.dot(gv) - y.dot(u);
        }
        gy_valid = true;
      } else {
        y = solve_y(k, x, config);
        gy_valid = false;
        delta = risk_delta(k, x, y);
      }

      pair.x = x;
      pair.y = y;
      pair.sweeps = it;
      pair.delta_f.push_back(delta);

      const std::size_t s = pair.delta_f.size();
      if (s >= 2) {
        const double f_new = f_current + pair.delta_f[s - 1];
        const double improvement = pair.delta_f[s - 2] - pair.delta_f[s - 1];
        if (improvement < config.inner_tol * std::abs(f_new)) break;
        const double dx = (x - x_prev).norm();
        const double dy = (y - y_prev).norm() / std::max(y.norm(), 1e-300);
        if (std::max(dx, dy) < config.inner_tol) break;
      }
      x_prev = x;
      y_prev = y;
    }

    if (!degenerate) return pair;
  }
  throw std::runtime_error("rank_one_alternating: direction collapsed after re-initializations");
}

RankOnePair rank_one_alternating(const InverseProblem& problem, const Matrix& x_r, const Matrix& y_r,
                                 const UpdateConfig& config) {
  auto kernels = make_kernels(problem, config.y_solver != YSolver::lsqr, config.dense_g_limit);
  auto rng = make_rng(config.seed);
  const double f_current =
      bayes_risk(problem, LowRankMatrix{x_r, y_r}, &kernels);
  return rank_one_alternating(kernels, x_r, y_r, config, rng, f_current);
}

UpdateResult orim_update(const InverseProblem& problem, const UpdateConfig& config) {
  problem.validate();
  if (problem.eta == 0.0)
    throw std::invalid_argument("orim_update: eta must be positive for rank updates");
  if (config.outer_tol < 0 || config.inner_tol <= 0 || config.lsqr_tol <= 0)
    throw std::invalid_argument("orim_update: tolerances must be positive");

  auto kernels = std::make_shared<const ProblemKernels>(
      make_kernels(problem, config.y_solver != YSolver::lsqr, config.dense_g_limit));
  const double f0 = risk_of_zero(problem, kernels.get());
  RiskCache cache = make_risk_cache(kernels, f0);

  UpdateResult out;
  out.Z = LowRankMatrix::zero(problem.solution_size(), problem.data_size());
  out.trace.f0 = f0;
  out.trace.reason = StopReason::rank_cap;

  auto rng = make_rng(config.seed);

  for (Index r = 0; r < config.outer_max_rank; ++r) {
    const double t0 = now_ms();
    RankOnePair pair;
    try {
      pair = rank_one_alternating(*kernels, out.Z.X, out.Z.Y, config, rng, cache.f_current);
    } catch (const std::runtime_error&) {
      out.trace.reason = StopReason::inner_failure;
      break;
    }

    const double delta = pair.delta_f.back();
    const double f_candidate = cache.f_current + delta;
    const double improvement = -delta;
    if (improvement < config.outer_tol * std::abs(f_candidate)) {
      out.trace.reason = StopReason::tolerance;
      out.trace.stopping_improvement = improvement;
      break;
    }

    const double f_new = incremental_risk(cache, problem, pair.x, pair.y);
    out.Z.append(pair.x, pair.y);
    out.trace.steps.push_back(UpdateStep{out.Z.rank(), f_new, pair.sweeps, now_ms() - t0});
  }
  return out;
}

}  // namespace orim
