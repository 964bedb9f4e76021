#include <doctest.h>

#include <cmath>

#include "orim/regularizers.hpp"
#include "orim/risk.hpp"

using namespace orim;

namespace {

InverseProblem random_problem(Index m, Index n, double eta, Rng& rng, bool with_initial = true) {
  Matrix a = gaussian_matrix(m, n, rng);
  Matrix m_xi = gaussian_matrix(n, n, rng) + 2.0 * Matrix::Identity(n, n);
  Vector mu = gaussian_vector(n, rng);
  auto prior = prior_from_factor(mu, m_xi);
  std::optional<LinearOperator> p;
  if (with_initial) p = LinearOperator::from_dense(gaussian_matrix(n, m, rng) * 0.3);
  return make_problem(LinearOperator::from_dense(a), eta, std::move(prior), std::move(p));
}

// [B C] blocks of the bracketed objective, for the oracle route
std::pair<Matrix, Matrix> oracle_blocks(const InverseProblem& problem) {
  const Matrix a = problem.forward.to_dense();
  const Matrix p = problem.initial_inverse.to_dense();
  const Matrix& m = *problem.prior.factor;
  const Index mm = a.rows();
  const Index pp = m.cols();
  Matrix b(a.cols(), pp + mm);
  b.leftCols(pp) = m - p * (a * m);
  b.rightCols(mm) = -problem.eta * p;
  Matrix c(mm, pp + mm);
  c.leftCols(pp) = a * m;
  c.rightCols(mm) = problem.eta * Matrix::Identity(mm, mm);
  return {b, c};
}

}  // namespace

TEST_SUITE("regularizers") {

TEST_CASE("friedland_torokhti identity cases") {
  auto rng = make_rng(301);
  Matrix b = gaussian_matrix(4, 6, rng);
  auto full = friedland_torokhti(b, Matrix::Identity(6, 6), 4);
  CHECK((full.Z - b).norm() <= 1e-10 * b.norm());
  CHECK(full.unique);

  Matrix c = gaussian_matrix(5, 5, rng) + 3.0 * Matrix::Identity(5, 5);
  auto self = friedland_torokhti(c, c, 5);
  CHECK((self.Z - Matrix::Identity(5, 5)).norm() < 1e-9);
}

TEST_CASE("friedland_torokhti beats random rank-2 candidates") {
  auto rng = make_rng(303);
  Matrix b = gaussian_matrix(6, 8, rng);
  Matrix c = gaussian_matrix(5, 8, rng);
  auto ft = friedland_torokhti(b, c, 2);
  const double f_star = (ft.Z * c - b).squaredNorm();
  for (int t = 0; t < 10000; ++t) {
    Matrix z = gaussian_matrix(6, 2, rng) * gaussian_matrix(2, 5, rng);
    CHECK(f_star <= (z * c - b).squaredNorm() + 1e-9);
  }
}

TEST_CASE("closed form specializes to truncated Tikhonov when P=0, S=I") {
  auto rng = make_rng(307);
  Matrix a = gaussian_matrix(10, 7, rng);
  const double eta = 0.25;
  auto problem = make_problem(LinearOperator::from_dense(a), eta, identity_prior(7));
  for (Index r : {1, 3, 5}) {
    auto cf = orim_closed_form(problem, r);
    auto ttik = truncated_tikhonov(a, r, eta);
    CHECK((cf.Z.to_dense() - ttik.to_dense()).norm() <= 1e-10 * ttik.to_dense().norm());
  }
}

TEST_CASE("closed form agrees with the Friedland-Torokhti oracle") {
  auto rng = make_rng(311);
  for (int trial = 0; trial < 4; ++trial) {
    auto problem = random_problem(10, 8, 0.2 + 0.3 * trial, rng);
    auto [b, c] = oracle_blocks(problem);
    for (Index r : {1, 3}) {
      auto cf = orim_closed_form(problem, r);
      auto ft = friedland_torokhti(b, c, r);
      const double f_cf = bayes_risk(problem, cf.Z);
      const double f_ft = bayes_risk(problem, ft.Z);
      CHECK(std::abs(f_cf - f_ft) <= 1e-10 * f_ft);
    }
  }
}

TEST_CASE("closed form update on an already-optimal P is a no-op") {
  auto rng = make_rng(313);
  auto base = random_problem(8, 8, 0.4, rng, false);
  auto full = orim_closed_form(base, 8);  // r = m: the unconstrained optimum
  auto updated = make_problem(base.forward, base.eta, base.prior,
                              LinearOperator::from_dense(full.Z.to_dense()));
  auto cf = orim_closed_form(updated, 2);
  const double f0 = risk_of_zero(updated);
  const double f1 = bayes_risk(updated, cf.Z);
  CHECK(cf.Z.to_dense().norm() <= 1e-8 * full.Z.to_dense().norm());
  CHECK(f0 - f1 <= 1e-10 * f0);
}

TEST_CASE("rank(F) precondition") {
  auto rng = make_rng(317);
  Matrix a = gaussian_matrix(6, 4, rng);
  auto problem = make_problem(LinearOperator::from_dense(a), 0.0, identity_prior(4));
  // eta = 0 and r < m violates the closed-form precondition
  CHECK_THROWS_AS(orim_closed_form(problem, 2), std::invalid_argument);
}

TEST_CASE("optimality and rank monotonicity on a random problem") {
  auto rng = make_rng(331);
  auto problem = random_problem(12, 9, 0.3, rng);
  const Matrix a = problem.forward.to_dense();

  auto im = orim_intermediates(problem);
  double prev = std::numeric_limits<double>::infinity();
  for (Index r = 1; r <= 6; ++r) {
    auto slice = orim_from_intermediates(im, r);
    const double f = bayes_risk(problem, slice.Z);
    CHECK(f <= prev + 1e-12);
    prev = f;

    const double f_tsvd = bayes_risk(problem, tsvd_inverse(a, r).to_dense());
    const double f_ttik = bayes_risk(problem, truncated_tikhonov(a, r, problem.eta).to_dense());
    CHECK(f <= f_tsvd + 1e-12 * f_tsvd);
    CHECK(f <= f_ttik + 1e-12 * f_ttik);
  }
}

TEST_CASE("tied eigenvalues: flag clears, risk value unaffected") {
  // A with a repeated singular value, S = I, P = 0 ties λ_1 = λ_2
  Matrix a = Matrix::Zero(4, 4);
  a.diagonal() << 2.0, 2.0, 1.0, 0.5;
  auto problem = make_problem(LinearOperator::from_dense(a), 0.3, identity_prior(4));
  auto im = orim_intermediates(problem);
  auto slice = orim_from_intermediates(im, 1);
  CHECK_FALSE(slice.unique);

  // permute the tied eigenvectors and recompute
  ClosedFormIntermediates permuted = im;
  permuted.eig.U.col(0).swap(permuted.eig.U.col(1));
  permuted.eig.eigenvalues.row(0).swap(permuted.eig.eigenvalues.row(1));
  permuted.Ginv_Ft = spd_solve(permuted.G, Matrix(permuted.F.transpose()));
  auto slice2 = orim_from_intermediates(permuted, 1);
  const double f1 = bayes_risk(problem, slice.Z);
  const double f2 = bayes_risk(problem, slice2.Z);
  CHECK(std::abs(f1 - f2) <= 1e-12 * f1);
}

TEST_CASE("tsvd_inverse") {
  Matrix d = Matrix::Zero(2, 2);
  d.diagonal() << 2.0, 1.0;
  auto z = tsvd_inverse(d, 1);
  Matrix expect = Matrix::Zero(2, 2);
  expect(0, 0) = 0.5;
  CHECK((z.to_dense() - expect).norm() < 1e-12);
  CHECK(z.unique);

  auto rng = make_rng(337);
  Matrix g = gaussian_matrix(5, 5, rng);
  Matrix q = Eigen::HouseholderQR<Matrix>(g).householderQ();
  auto zq = tsvd_inverse(q, 2);
  CHECK_FALSE(zq.unique);  // all singular values tie at 1
  // A_r† = V_r U_rᵀ: acts as Qᵀ on the kept subspace
  const auto& rep = *zq.spectral;
  CHECK((zq.to_dense() - rep.V * rep.U.transpose()).norm() < 1e-12);

  Matrix a = gaussian_matrix(8, 8, rng);
  auto z3 = tsvd_inverse(a, 3);
  auto tsv = truncated_svd(a, 3);
  CHECK((z3.to_dense() * a * tsv.V - tsv.V).norm() < 1e-9);  // identity on span(V_r)

  CHECK_THROWS_AS(tsvd_inverse(d, 3), std::invalid_argument);
  Matrix singular = Matrix::Zero(3, 3);
  singular(0, 0) = 1.0;
  CHECK_THROWS_AS(tsvd_inverse(singular, 2), std::invalid_argument);
}

TEST_CASE("truncated_tikhonov") {
  auto rng = make_rng(347);
  Matrix a = gaussian_matrix(6, 5, rng);
  auto t0 = truncated_tikhonov(a, 3, 0.0);
  auto ts = tsvd_inverse(a, 3);
  CHECK((t0.to_dense() - ts.to_dense()).norm() < 1e-10);

  auto tid = truncated_tikhonov(Matrix::Identity(4, 4), 4, 1.0);
  CHECK((tid.to_dense() - 0.5 * Matrix::Identity(4, 4)).norm() < 1e-12);

  // full rank: equals the closed form with P = 0, S = I
  auto problem = make_problem(LinearOperator::from_dense(a), 0.3, identity_prior(5));
  auto cf = orim_closed_form(problem, 5);
  auto tt = truncated_tikhonov(a, 5, 0.3);
  CHECK((cf.Z.to_dense() - tt.to_dense()).norm() <= 1e-10 * tt.to_dense().norm());
}

TEST_CASE("tikhonov_inverse") {
  auto tid = tikhonov_inverse(Matrix::Identity(3, 3), 1.0);
  CHECK((tid.to_dense() - 0.5 * Matrix::Identity(3, 3)).norm() < 1e-12);

  auto rng = make_rng(349);
  Matrix sq = gaussian_matrix(5, 5, rng) + 3.0 * Matrix::Identity(5, 5);
  auto tiny = tikhonov_inverse(sq, 1e-8);
  CHECK((tiny.to_dense() - sq.inverse()).norm() <= 1e-4 * sq.inverse().norm());

  Matrix a = gaussian_matrix(10, 8, rng);
  const double eta = 0.4;
  auto tik = tikhonov_inverse(a, eta);
  Vector b = gaussian_vector(10, rng);
  Matrix normal = a.transpose() * a + eta * eta * Matrix::Identity(8, 8);
  Vector oracle = normal.ldlt().solve(a.transpose() * b);
  CHECK((tik.apply(b) - oracle).norm() <= 1e-10 * oracle.norm());
}

TEST_CASE("orim0_inverse") {
  auto rng = make_rng(353);
  Matrix a = gaussian_matrix(7, 5, rng);
  const double eta = 0.3;

  auto z_id = orim0_inverse(a, Matrix::Identity(5, 5), eta, 2);
  auto tt = truncated_tikhonov(a, 2, eta);
  CHECK((z_id.to_dense() - tt.to_dense()).norm() <= 1e-10 * tt.to_dense().norm());

  // M_xi = c I: same column space as truncated Tikhonov
  const double c = 2.5;
  auto z_scaled = orim0_inverse(a, c * Matrix::Identity(5, 5), eta, 2);
  Matrix x1 = z_scaled.low_rank->X;
  Matrix v2 = truncated_tikhonov(a, 2, eta).spectral->V;
  CHECK((x1 * x1.transpose() - v2 * v2.transpose()).norm() < 1e-9);

  // with a nonzero mean in the objective, the full-prior optimum is at least as good
  Matrix m_xi = gaussian_matrix(5, 5, rng) + 2.0 * Matrix::Identity(5, 5);
  Vector mu = 3.0 * Vector::Ones(5);
  auto prior = prior_from_factor(mu, m_xi);
  auto problem = make_problem(LinearOperator::from_dense(a), eta, prior);
  auto best = orim_closed_form(problem, 2);
  auto z0 = orim0_inverse(a, m_xi, eta, 2);
  const double f_best = bayes_risk(problem, best.Z);
  const double f_z0 = bayes_risk(problem, z0.to_dense());
  CHECK(f_best <= f_z0 + 1e-12 * f_z0);
}

TEST_CASE("extended_svd") {
  auto e1 = extended_svd(Matrix::Identity(2, 2), 1.0);
  CHECK((e1.D - Vector::Constant(2, std::sqrt(2.0))).norm() < 1e-12);
  CHECK((e1.V11.cwiseAbs() - Matrix::Identity(2, 2) / std::sqrt(2.0)).norm() < 1e-12);
  CHECK((e1.V21.cwiseAbs() - Matrix::Identity(2, 2) / std::sqrt(2.0)).norm() < 1e-12);

  Matrix d30 = Matrix::Zero(2, 2);
  d30(0, 0) = 3.0;
  auto e2 = extended_svd(d30, 1.0);
  CHECK(e2.D(0) == doctest::Approx(std::sqrt(10.0)));
  CHECK(e2.D(1) == doctest::Approx(1.0));
  CHECK_THROWS_AS(extended_svd(d30, 0.0), std::invalid_argument);

  auto rng = make_rng(359);
  Matrix a = gaussian_matrix(5, 4, rng);
  const double eta = 0.1;
  auto ex = extended_svd(a, eta);
  // invariants
  CHECK((ex.V11.transpose() * ex.V11 + ex.V21.transpose() * ex.V21 - Matrix::Identity(5, 5)).norm() <
        1e-10);
  CHECK((a * ex.V11 + eta * ex.V21 - ex.U * ex.D.asDiagonal()).norm() <= 1e-10 * a.norm());
  // D equals the singular values of [A ηI]
  Matrix stacked(5, 9);
  stacked.leftCols(4) = a;
  stacked.rightCols(5) = eta * Matrix::Identity(5, 5);
  auto direct = svd(stacked);
  Vector d_sorted = ex.D;
  std::sort(d_sorted.data(), d_sorted.data() + d_sorted.size(), std::greater<double>());
  CHECK((d_sorted - direct.singular_values).norm() < 1e-10);
}

TEST_CASE("golub_kahan_inverse") {
  auto rng = make_rng(367);

  // full-rank consistent system: P b is the minimum-norm solution
  Matrix a = gaussian_matrix(6, 6, rng) + 3.0 * Matrix::Identity(6, 6);
  Vector xtrue = gaussian_vector(6, rng);
  Vector b = a * xtrue;
  auto p_full = golub_kahan_inverse(LinearOperator::from_dense(a), b, 6);
  CHECK((p_full.apply(b) - xtrue).norm() <= 1e-8 * xtrue.norm());

  // k-step application to the generating b equals the k-th LSQR iterate
  Matrix tall = gaussian_matrix(20, 15, rng);
  Vector d = gaussian_vector(20, rng);
  for (Index k : {3, 7}) {
    auto p = golub_kahan_inverse(LinearOperator::from_dense(tall), d, k);
    auto it = lsqr(LinearOperator::from_dense(tall), d, 1e-300, static_cast<int>(k));
    CHECK((p.apply(d) - it.solution).norm() <= 1e-8 * std::max(1.0, it.solution.norm()));
  }

  Vector e1 = Vector::Zero(3);
  e1(0) = 1.0;
  auto pid = golub_kahan_inverse(LinearOperator::identity(3), e1, 1);
  Matrix expected = Matrix::Zero(3, 3);
  expected(0, 0) = 1.0;
  CHECK((pid.to_dense() - expected).norm() < 1e-12);
  CHECK(pid.gk->breakdown);
}

TEST_CASE("regularized inverse representations are consistent") {
  auto rng = make_rng(373);
  Matrix a = gaussian_matrix(7, 5, rng);
  auto z = truncated_tikhonov(a, 3, 0.2);
  Vector b = gaussian_vector(7, rng);
  Vector v = gaussian_vector(5, rng);
  CHECK((z.apply(b) - z.to_dense() * b).norm() < 1e-12);
  CHECK((z.apply_transpose(v) - z.to_dense().transpose() * v).norm() < 1e-12);
  auto op = z.as_operator();
  CHECK((op.apply(b) - z.apply(b)).norm() == 0.0);
  CHECK(adjoint_mismatch(op, 20, rng) < 1e-10);
}

}  // TEST_SUITE
