#include "orim/risk.hpp"

#include <functional>
#include <stdexcept>

namespace orim {

namespace {

// W = P + Z accessors used by the probe-based trace evaluation.
using ColFn = std::function<Vector(Index)>;  // j -> Wᵀ e_j

double trace_form_probe(const ProblemKernels& k, const ColFn& wt_col) {
  const Index n = k.A.cols();
  double f = k.S.trace();
  for (Index j = 0; j < n; ++j) {
    Vector wj = wt_col(j);                      // Wᵀ e_j
    Vector vj = k.A.apply(k.S.apply_basis(j));  // A S e_j
    f += wj.dot(k.apply_G(wj)) - 2.0 * wj.dot(vj);
  }
  return f;
}

double trace_form_dense(const ProblemKernels& k, const Matrix& w) {
  // tr(W G Wᵀ) - 2 tr(W A S) + tr(S) with dense G and S Aᵀ at hand;
  // the quadratic term goes through the Cholesky factor: tr(WGWᵀ) = ||WL||².
  const Matrix& sat = *k.SAt;
  const double quad = k.G_chol ? k.G_chol->right_multiply_factor(w).squaredNorm()
                               : (w * (*k.G)).cwiseProduct(w).sum();
  return quad - 2.0 * w.cwiseProduct(sat).sum() + k.S.trace();
}

bool dense_eval_feasible(const ProblemKernels& k) {
  if (!k.has_dense_G() || !k.SAt) return false;
  if (static_cast<double>(k.A.rows()) * static_cast<double>(k.A.cols()) > 4e6) return false;
  return true;
}

ProblemKernels ensure_kernels(const InverseProblem& problem, const ProblemKernels* kernels) {
  if (kernels) return *kernels;
  return make_kernels(problem);
}

double bayes_risk_impl(const InverseProblem& problem, const ProblemKernels* kernels,
                       const ColFn& zt_col, const Matrix* z_dense) {
  ProblemKernels k = ensure_kernels(problem, kernels);
  if (dense_eval_feasible(k)) {
    Matrix w = k.P.to_dense();
    if (z_dense)
      w += *z_dense;
    else
      for (Index j = 0; j < w.rows(); ++j) w.row(j) += zt_col(j).transpose();
    return trace_form_dense(k, w);
  }
  auto wt_col = [&](Index j) -> Vector {
    Vector e = Vector::Zero(k.A.cols());
    e(j) = 1.0;
    Vector wj = k.P.is_zero() ? Vector(Vector::Zero(k.A.rows())) : k.P.apply_transpose(e);
    if (z_dense)
      wj += z_dense->row(j).transpose();
    else
      wj += zt_col(j);
    return wj;
  };
  return trace_form_probe(k, wt_col);
}

}  // namespace

Vector ProblemKernels::apply_G(const Vector& y) const {
  if (G) return (*G) * y;
  return A.apply(S.apply(A.apply_transpose(y))) + (eta * eta) * y;
}

Vector ProblemKernels::apply_AS(const Vector& x) const {
  if (SAt) return SAt->transpose() * x;
  return A.apply(S.apply(x));
}

Vector ProblemKernels::apply_SAt(const Vector& y) const {
  if (SAt) return (*SAt) * y;
  return S.apply(A.apply_transpose(y));
}

ProblemKernels make_kernels(const InverseProblem& problem, bool want_dense_g, Index dense_limit) {
  ProblemKernels k;
  k.A = problem.forward;
  k.P = problem.initial_inverse;
  k.S = problem.prior.second_moment;
  k.eta = problem.eta;
  k.S_factor = k.S.factor();

  const Index m = k.A.rows();
  const Index n = k.A.cols();
  if (!want_dense_g || m > dense_limit) return k;

  const double eta2 = k.eta * k.eta;
  if (k.A.dense_ptr() != nullptr) {
    const Matrix& a = *k.A.dense_ptr();
    Matrix g;
    if (k.S.is_identity()) {
      g = Matrix::Zero(m, m);
      g.selfadjointView<Eigen::Lower>().rankUpdate(a);
      g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
      k.SAt = std::make_shared<const Matrix>(a.transpose());
    } else {
      Matrix sat = k.S.apply(Matrix(a.transpose()));
      g = a * sat;
      k.SAt = std::make_shared<const Matrix>(std::move(sat));
    }
    g.diagonal().array() += eta2;
    k.G = std::make_shared<const Matrix>(std::move(g));
  } else if (k.A.sparse_ptr() != nullptr) {
    const SparseMatrix& a = *k.A.sparse_ptr();
    Matrix g;
    if (k.S.is_identity()) {
      g = Matrix(SparseMatrix(a * a.transpose()));
    } else if (k.S.diag_part() != nullptr) {
      SparseMatrix scaled = a * k.S.diag_part()->asDiagonal();
      g = Matrix(SparseMatrix(scaled * a.transpose()));
      Vector au = a * (*k.S.rank1_part());
      g += au * au.transpose();
    } else if (static_cast<double>(m) * static_cast<double>(n) <= 4e6) {
      Matrix ad = Matrix(a);
      Matrix sat = k.S.apply(Matrix(ad.transpose()));
      g = ad * sat;
      k.SAt = std::make_shared<const Matrix>(std::move(sat));
    } else {
      return k;  // stay matrix-free
    }
    g.diagonal().array() += eta2;
    k.G = std::make_shared<const Matrix>(std::move(g));
  } else {
    return k;
  }
  k.G_chol = std::make_shared<const SpdFactorization>(*k.G);
  return k;
}

double bayes_risk(const InverseProblem& problem, const Matrix& z, const ProblemKernels* kernels) {
  if (z.rows() != problem.solution_size() || z.cols() != problem.data_size())
    throw std::invalid_argument("bayes_risk: Z dimension mismatch");
  return bayes_risk_impl(problem, kernels, nullptr, &z);
}

double bayes_risk(const InverseProblem& problem, const LowRankMatrix& z, const ProblemKernels* kernels) {
  if (z.rows() != problem.solution_size() || z.cols() != problem.data_size())
    throw std::invalid_argument("bayes_risk: Z dimension mismatch");
  auto zt_col = [&z](Index j) -> Vector { return z.Y * z.X.row(j).transpose(); };
  return bayes_risk_impl(problem, kernels, zt_col, nullptr);
}

double risk_of_zero(const InverseProblem& problem, const ProblemKernels* kernels) {
  if (problem.initial_inverse.is_zero()) return problem.prior.second_moment.trace();
  ProblemKernels k = ensure_kernels(problem, kernels);
  if (dense_eval_feasible(k)) return trace_form_dense(k, k.P.to_dense());
  const Index n = k.A.cols();
  auto wt_col = [&](Index j) -> Vector {
    Vector e = Vector::Zero(n);
    e(j) = 1.0;
    return k.P.apply_transpose(e);
  };
  return trace_form_probe(k, wt_col);
}

RiskCache make_risk_cache(const InverseProblem& problem) {
  auto kernels = std::make_shared<const ProblemKernels>(make_kernels(problem));
  RiskCache cache;
  cache.kernels = kernels;
  cache.f_current = risk_of_zero(problem, kernels.get());
  cache.X_hist = Matrix(problem.solution_size(), 0);
  return cache;
}

RiskCache make_risk_cache(std::shared_ptr<const ProblemKernels> kernels, double f0) {
  RiskCache cache;
  cache.X_hist = Matrix(kernels->A.cols(), 0);
  cache.kernels = std::move(kernels);
  cache.f_current = f0;
  return cache;
}

double incremental_risk(RiskCache& cache, const InverseProblem& problem, const Vector& x,
                        const Vector& y) {
  if (!cache.kernels) throw std::invalid_argument("incremental_risk: cache not initialized");
  const ProblemKernels& k = *cache.kernels;
  if (x.size() != k.A.cols() || y.size() != k.A.rows())
    throw std::invalid_argument("incremental_risk: dimension mismatch");
  if (std::abs(x.norm() - 1.0) > 1e-8)
    throw std::invalid_argument("incremental_risk: x must have unit norm");
  if (cache.X_hist.cols() > 0 &&
      (cache.X_hist.transpose() * x).cwiseAbs().maxCoeff() > 1e-8)
    throw std::invalid_argument("incremental_risk: x must be orthogonal to previous columns");

  const Vector ptx = k.P.is_zero() ? Vector(Vector::Zero(y.size())) : k.P.apply_transpose(x);
  const double delta = y.dot(k.apply_G(y + 2.0 * ptx)) - 2.0 * y.dot(k.apply_AS(x));

  cache.f_current += delta;
  cache.r_current += 1;
  cache.X_hist.conservativeResize(x.size(), cache.X_hist.cols() + 1);
  cache.X_hist.col(cache.X_hist.cols() - 1) = x;
  (void)problem;
  return cache.f_current;
}

namespace {

double monte_carlo_impl(const InverseProblem& problem, const std::function<Vector(const Vector&)>& z_apply,
                        int samples, std::uint64_t seed) {
  if (samples < 1) throw std::invalid_argument("monte_carlo_risk: samples must be >= 1");
  LinearOperator cov_factor = [&]() {
    if (problem.prior.cov_factor) return *problem.prior.cov_factor;
    const Index n = problem.solution_size();
    if (n > 2000) throw std::invalid_argument("monte_carlo_risk: no covariance factor available");
    Matrix gamma = problem.prior.second_moment.dense() - problem.prior.mean * problem.prior.mean.transpose();
    auto eig = symmetric_eig(0.5 * (gamma + gamma.transpose()));
    return LinearOperator::from_dense(eig.U * eig.eigenvalues.cwiseMax(0.0).cwiseSqrt().asDiagonal());
  }();

  auto rng = make_rng(seed);
  const Index m = problem.data_size();
  double total = 0.0;
  for (int s = 0; s < samples; ++s) {
    Vector xi = problem.prior.mean + cov_factor.apply(gaussian_vector(cov_factor.cols(), rng));
    Vector b = problem.forward.apply(xi) + problem.eta * gaussian_vector(m, rng);
    Vector recon = problem.initial_inverse.apply(b) + z_apply(b);
    total += (recon - xi).squaredNorm();
  }
  return total / samples;
}

}  // namespace

double monte_carlo_risk(const InverseProblem& problem, const Matrix& z, int samples, std::uint64_t seed) {
  return monte_carlo_impl(problem, [&z](const Vector& b) -> Vector { return z * b; }, samples, seed);
}

double monte_carlo_risk(const InverseProblem& problem, const LowRankMatrix& z, int samples,
                        std::uint64_t seed) {
  return monte_carlo_impl(problem, [&z](const Vector& b) -> Vector { return z.apply(b); }, samples, seed);
}

}  // namespace orim
