#include <doctest.h>

#include <cmath>

#include "orim/risk.hpp"

using namespace orim;

namespace {

// ||Z [AM ηI] - [M - PAM  -ηP]||_F², the bracketed-matrix objective with an
// explicit factor M; independent oracle for the trace-form evaluation.
double factored_objective(const Matrix& a, const Matrix& m, const Matrix& p, double eta,
                          const Matrix& z) {
  const Index mm = a.rows();
  const Index n = a.cols();
  const Index pp = m.cols();
  Matrix c(mm, pp + mm);
  c.leftCols(pp) = a * m;
  c.rightCols(mm) = eta * Matrix::Identity(mm, mm);
  Matrix b(n, pp + mm);
  b.leftCols(pp) = m - p * (a * m);
  b.rightCols(mm) = -eta * p;
  return (z * c - b).squaredNorm();
}

InverseProblem random_factored_problem(Index m, Index n, double eta, Rng& rng,
                                       bool with_initial = true) {
  Matrix a = gaussian_matrix(m, n, rng);
  Matrix m_xi = gaussian_matrix(n, n, rng) + 2.0 * Matrix::Identity(n, n);
  Vector mu = gaussian_vector(n, rng);
  auto prior = prior_from_factor(mu, m_xi);
  std::optional<LinearOperator> p;
  if (with_initial) p = LinearOperator::from_dense(gaussian_matrix(n, m, rng) * 0.3);
  return make_problem(LinearOperator::from_dense(a), eta, std::move(prior), std::move(p));
}

}  // namespace

TEST_SUITE("risk") {

TEST_CASE("bayes_risk trivial values") {
  auto rng = make_rng(201);
  const Index n = 5;
  // Z = 0, P = 0, S = I, eta = 0 -> f = n
  Matrix a = gaussian_matrix(6, n, rng);
  auto problem = make_problem(LinearOperator::from_dense(a), 0.0, identity_prior(n));
  CHECK(bayes_risk(problem, Matrix::Zero(n, 6)) == doctest::Approx(static_cast<double>(n)));

  // Z = A⁻¹, P = 0, eta = 0 -> f = 0
  Matrix sq = gaussian_matrix(n, n, rng) + 3.0 * Matrix::Identity(n, n);
  auto square_problem = make_problem(LinearOperator::from_dense(sq), 0.0, identity_prior(n));
  CHECK(bayes_risk(square_problem, Matrix(sq.inverse())) == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("bayes_risk matches the factored-M oracle") {
  auto rng = make_rng(203);
  auto problem = random_factored_problem(8, 6, 0.4, rng);
  const Matrix a = problem.forward.to_dense();
  const Matrix p = problem.initial_inverse.to_dense();
  const Matrix& m = *problem.prior.factor;

  for (int t = 0; t < 5; ++t) {
    Matrix z = gaussian_matrix(6, 8, rng);
    const double oracle = factored_objective(a, m, p, problem.eta, z);
    const double trace_form = bayes_risk(problem, z);
    CHECK(std::abs(trace_form - oracle) <= 1e-10 * oracle);
  }
}

TEST_CASE("risk_of_zero") {
  auto rng = make_rng(207);
  const Index n = 6;
  Matrix a = gaussian_matrix(9, n, rng);
  auto p0 = make_problem(LinearOperator::from_dense(a), 0.7, identity_prior(n));
  CHECK(risk_of_zero(p0) == doctest::Approx(static_cast<double>(n)));

  Matrix g = gaussian_matrix(n, n, rng);
  auto prior = prior_from_mean_cov(gaussian_vector(n, rng), Matrix(g * g.transpose()) + Matrix::Identity(n, n));
  const double trace_s = prior.second_moment.trace();
  auto p1 = make_problem(LinearOperator::from_dense(a), 0.7, prior);
  CHECK(risk_of_zero(p1) == doctest::Approx(trace_s));

  auto p2 = random_factored_problem(7, 5, 0.2, rng);
  CHECK(risk_of_zero(p2) == doctest::Approx(bayes_risk(p2, Matrix::Zero(5, 7))).epsilon(1e-12));
}

TEST_CASE("risk_of_zero matrix-free probe agrees with the dense route") {
  auto rng = make_rng(209);
  const Index m = 9, n = 7;
  Matrix a = gaussian_matrix(m, n, rng);
  Matrix p = gaussian_matrix(n, m, rng) * 0.2;
  // wrap both operators without storage so the probe path runs
  auto a_op = LinearOperator(m, n, [a](const Vector& x) { return Vector(a * x); },
                             [a](const Vector& y) { return Vector(a.transpose() * y); });
  auto p_op = LinearOperator(n, m, [p](const Vector& x) { return Vector(p * x); },
                             [p](const Vector& y) { return Vector(p.transpose() * y); });
  auto probe_problem = make_problem(a_op, 0.3, identity_prior(n), p_op);
  auto dense_problem = make_problem(LinearOperator::from_dense(a), 0.3, identity_prior(n),
                                    LinearOperator::from_dense(p));
  CHECK(risk_of_zero(probe_problem) == doctest::Approx(risk_of_zero(dense_problem)).epsilon(1e-12));
}

TEST_CASE("incremental risk tracks full recomputation") {
  auto rng = make_rng(211);
  auto problem = random_factored_problem(10, 12, 0.5, rng);  // m < n regime is fine here
  auto cache = make_risk_cache(problem);
  CHECK(cache.f_current == doctest::Approx(risk_of_zero(problem)));

  auto z = LowRankMatrix::zero(12, 10);
  for (int step = 0; step < 10; ++step) {
    Vector x = gaussian_vector(12, rng);
    if (z.rank() > 0) x -= z.X * (z.X.transpose() * x);
    x.normalize();
    Vector y = gaussian_vector(10, rng);
    const double f_inc = incremental_risk(cache, problem, x, y);
    z.append(x, y);
    const double f_full = bayes_risk(problem, z);
    CHECK(std::abs(f_inc - f_full) <= 1e-10 * std::abs(f_full));
  }
}

TEST_CASE("incremental risk special cases and preconditions") {
  auto rng = make_rng(213);
  auto problem = random_factored_problem(8, 6, 0.4, rng);
  auto cache = make_risk_cache(problem);
  const double f0 = cache.f_current;

  Vector x = gaussian_vector(6, rng).normalized();
  CHECK(incremental_risk(cache, problem, x, Vector::Zero(8)) == doctest::Approx(f0));

  // first update from Z = 0, P = 0: f = f0 + yᵀGy - 2yᵀASx
  auto p0 = make_problem(problem.forward, problem.eta, problem.prior);
  auto cache0 = make_risk_cache(p0);
  auto kernels = make_kernels(p0);
  Vector x1 = gaussian_vector(6, rng).normalized();
  Vector y1 = gaussian_vector(8, rng);
  const double expect = cache0.f_current + y1.dot(kernels.apply_G(y1)) - 2.0 * y1.dot(kernels.apply_AS(x1));
  CHECK(incremental_risk(cache0, p0, x1, y1) == doctest::Approx(expect).epsilon(1e-12));

  CHECK_THROWS_AS(incremental_risk(cache, problem, 2.0 * x, Vector::Zero(8)), std::invalid_argument);
  CHECK_THROWS_AS(incremental_risk(cache, problem, x, Vector::Zero(8)), std::invalid_argument);
}

TEST_CASE("three evaluation routes agree on random instances") {
  auto rng = make_rng(217);
  for (int trial = 0; trial < 4; ++trial) {
    const Index m = 10 + 5 * trial;
    const Index n = 8 + 3 * trial;
    auto problem = random_factored_problem(m, n, 0.1 + 0.2 * trial, rng);
    const Matrix a = problem.forward.to_dense();
    const Matrix pd = problem.initial_inverse.to_dense();

    auto cache = make_risk_cache(problem);
    auto z = LowRankMatrix::zero(n, m);
    double f_inc = cache.f_current;
    for (int step = 0; step < 4; ++step) {
      Vector x = gaussian_vector(n, rng);
      if (z.rank() > 0) x -= z.X * (z.X.transpose() * x);
      x.normalize();
      Vector y = gaussian_vector(m, rng);
      f_inc = incremental_risk(cache, problem, x, y);
      z.append(x, y);
    }
    const double f_trace = bayes_risk(problem, z);
    const double f_oracle = factored_objective(a, *problem.prior.factor, pd, problem.eta, z.to_dense());
    CHECK(std::abs(f_trace - f_oracle) <= 1e-10 * f_oracle);
    CHECK(std::abs(f_inc - f_oracle) <= 1e-10 * f_oracle);
  }
}

TEST_CASE("risk is invariant under orthogonal refactorization") {
  auto rng = make_rng(219);
  auto problem = random_factored_problem(9, 7, 0.3, rng);
  Matrix x = gaussian_matrix(7, 3, rng);
  Matrix y = gaussian_matrix(9, 3, rng);
  Matrix q = Eigen::HouseholderQR<Matrix>(gaussian_matrix(3, 3, rng)).householderQ();
  LowRankMatrix z1{x, y};
  LowRankMatrix z2{x * q, y * q};
  CHECK(bayes_risk(problem, z1) == doctest::Approx(bayes_risk(problem, z2)).epsilon(1e-12));
}

TEST_CASE("monte carlo risk: exact-inverse and identity sanity") {
  auto rng = make_rng(223);
  const Index n = 5;
  Matrix sq = gaussian_matrix(n, n, rng) + 3.0 * Matrix::Identity(n, n);
  auto problem = make_problem(LinearOperator::from_dense(sq), 0.0, identity_prior(n));
  CHECK(monte_carlo_risk(problem, Matrix(sq.inverse()), 200, 7) == doctest::Approx(0.0).epsilon(1e-18));

  // Z = 0, P = 0, eta = 0, ξ ~ N(0, I): estimate ≈ n
  const double est = monte_carlo_risk(problem, Matrix::Zero(n, n), 20000, 11);
  CHECK(est == doctest::Approx(static_cast<double>(n)).epsilon(0.05));
}

TEST_CASE("monte carlo risk converges to the exact value") {
  auto rng = make_rng(227);
  auto problem = random_factored_problem(8, 6, 0.5, rng);
  Matrix z = gaussian_matrix(6, 8, rng) * 0.1;
  const double exact = bayes_risk(problem, z);

  // within 3 standard errors at 1e4 samples (std of the squared norm is
  // estimated from a pilot run at the same seed)
  const int samples = 10000;
  auto pilot_rng = make_rng(31);
  double mean = 0.0, sq_mean = 0.0;
  {
    // estimate the per-sample standard deviation with an independent clone
    const int pilot = 2000;
    for (int s = 0; s < pilot; ++s) {
      double v = monte_carlo_risk(problem, z, 1, 1000 + static_cast<std::uint64_t>(s));
      mean += v;
      sq_mean += v * v;
    }
    mean /= pilot;
    sq_mean /= pilot;
  }
  const double per_sample_std = std::sqrt(std::max(sq_mean - mean * mean, 0.0));
  const double est = monte_carlo_risk(problem, z, samples, 31);
  CHECK(std::abs(est - exact) <= 3.0 * per_sample_std / std::sqrt(static_cast<double>(samples)));
  (void)pilot_rng;

  // ~1/sqrt(samples): two sizes, generous factor
  double err_small = 0.0, err_large = 0.0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    err_small += std::abs(monte_carlo_risk(problem, z, 400, 100 + s) - exact);
    err_large += std::abs(monte_carlo_risk(problem, z, 40000, 200 + s) - exact);
  }
  CHECK(err_large < err_small * 0.4);  // expected ratio 0.1
}

}  // TEST_SUITE
