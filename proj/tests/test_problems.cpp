#include <doctest.h>

#include <cmath>
#include <numbers>

#include "orim/problems.hpp"
#include "orim/regularizers.hpp"
#include "orim/risk.hpp"

using namespace orim;

TEST_SUITE("problems") {

TEST_CASE("heat kernel") {
  const double expect = std::exp(-0.25) / (2.0 * std::sqrt(std::numbers::pi));
  CHECK(heat_kernel(1.0, 1.0) == doctest::Approx(expect).epsilon(1e-14));

  // smooth underflow, no NaN
  const double tiny = heat_kernel(1e-12, 1.0);
  CHECK(tiny == 0.0);
  CHECK_FALSE(std::isnan(heat_kernel(1e-300, 2.0)));
  CHECK_THROWS_AS(heat_kernel(0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(heat_kernel(-1.0, 1.0), std::invalid_argument);

  // unimodal on (0, 1]: rises then falls
  double prev = heat_kernel(1e-3, 1.0);
  int sign_changes = 0;
  bool increasing = true;
  for (int i = 2; i <= 1000; ++i) {
    const double t = static_cast<double>(i) * 1e-3;
    const double v = heat_kernel(t, 1.0);
    const bool now_increasing = v >= prev;
    if (now_increasing != increasing) {
      ++sign_changes;
      increasing = now_increasing;
    }
    prev = v;
  }
  CHECK(sign_changes == 1);
}

TEST_CASE("heat problem discretization") {
  auto a2 = heat_problem({2, 1.0});
  const double h = 0.5;
  CHECK(a2(0, 0) == doctest::Approx(h * heat_kernel(0.5 * h, 1.0)));
  CHECK(a2(1, 1) == doctest::Approx(h * heat_kernel(0.5 * h, 1.0)));
  CHECK(a2(1, 0) == doctest::Approx(h * heat_kernel(1.5 * h, 1.0)));
  CHECK(a2(0, 1) == 0.0);

  // severe decay: tiny relative singular values by index 100, numerically
  // rank deficient well before n
  auto a = heat_problem({200, 1.0});
  auto s = svd(a);
  CHECK(s.singular_values(99) / s.singular_values(0) < 1e-4);
  CHECK(s.singular_values(199) / s.singular_values(0) < 1e-12);
  CHECK(numerical_rank(s.singular_values, 200, 200) < 200);

  auto a_k2 = heat_problem({200, 2.0});
  CHECK((a_k2 - a).norm() / a.norm() > 0.01);
}

TEST_CASE("heat matrices are severely ill-conditioned") {
  for (double kappa : {1.0, 2.0}) {
    auto a = heat_problem({120, kappa});
    auto s = svd(a);
    CHECK(s.singular_values(0) / s.singular_values(119) > 1e10);
  }
}

TEST_CASE("dct matrix is orthonormal") {
  for (Index n : {1, 5, 16}) {
    Matrix c = dct_matrix(n);
    CHECK((c * c.transpose() - Matrix::Identity(n, n)).norm() < 1e-12);
  }
}

TEST_CASE("deblur identity psf") {
  auto p = deblur_problem(8, 8, 1);
  CHECK((p.spectrum - Matrix::Ones(8, 8)).norm() < 1e-12);
  auto rng = make_rng(501);
  Vector x = gaussian_vector(64, rng);
  CHECK((p.op().apply(x) - x).norm() < 1e-12);
}

TEST_CASE("deblur preserves constants") {
  auto p = deblur_problem(12, 12, 5);
  CHECK(p.psf.sum() == doctest::Approx(1.0));
  Vector ones = Vector::Ones(144);
  CHECK((p.op().apply(ones) - ones).norm() < 1e-10);
}

TEST_CASE("deblur transform-domain apply equals direct reflexive convolution") {
  auto p = deblur_problem(16, 16, 3);
  auto rng = make_rng(503);
  Matrix img = gaussian_matrix(16, 16, rng);
  Matrix direct = reflexive_convolve(img, p.psf);
  Vector x = Eigen::Map<Vector>(img.data(), 256);
  Vector via_op = p.op().apply(x);
  CHECK((via_op - Eigen::Map<Vector>(direct.data(), 256)).norm() <= 1e-10 * direct.norm());

  // larger psf too
  auto p7 = deblur_problem(16, 16, 7);
  Matrix direct7 = reflexive_convolve(img, p7.psf);
  CHECK((p7.op().apply(x) - Eigen::Map<Vector>(direct7.data(), 256)).norm() <= 1e-10 * direct7.norm());
}

TEST_CASE("deblur operator is symmetric") {
  auto p = deblur_problem(10, 10, 3);
  auto rng = make_rng(509);
  auto op = p.op();
  for (int t = 0; t < 10; ++t) {
    Vector u = gaussian_vector(100, rng);
    Vector v = gaussian_vector(100, rng);
    const double lhs = op.apply(u).dot(v);
    const double rhs = u.dot(op.apply(v));
    CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(std::abs(lhs), 1.0));
  }
  CHECK_THROWS_AS(deblur_problem(10, 10, 4), std::invalid_argument);
}

TEST_CASE("tomography axis-aligned projections are exact") {
  const Index n_pix = 16;
  auto tomo = tomo_problem(n_pix, {0.0, 90.0});
  const Index w = tomo.width;
  const double h = 1.0 / static_cast<double>(w);

  Matrix img = shepp_logan(n_pix);
  Vector x = tomo.embed(img);
  Eigen::Map<const Matrix> padded(x.data(), w, w);
  Vector proj = Vector(tomo.A * x);

  // θ = 0: column sums
  for (Index c = 0; c < w; ++c)
    CHECK(proj(c) == doctest::Approx(h * padded.col(c).sum()).epsilon(1e-10));
  // θ = 90: row sums
  for (Index r = 0; r < w; ++r)
    CHECK(proj(w + r) == doctest::Approx(h * padded.row(r).sum()).epsilon(1e-10));
}

TEST_CASE("tomography conserves mass") {
  const Index n_pix = 48;
  auto tomo = tomo_problem(n_pix, {0.0, 13.0, 45.0, 77.5, 90.0, 121.0});
  const Index w = tomo.width;
  const double h = 1.0 / static_cast<double>(w);
  Vector x = tomo.embed(shepp_logan(n_pix));
  const double mass = x.sum() * h;
  Vector proj = Vector(tomo.A * x);
  for (std::size_t j = 0; j < tomo.angles_deg.size(); ++j) {
    const double pmass = proj.segment(static_cast<Index>(j) * w, w).sum();
    CHECK(std::abs(pmass - mass) <= 0.005 * mass);
  }
}

TEST_CASE("rotation drops far corners for oblique angles") {
  const Index w = 20;
  auto s = rotation_matrix(w, 45.0);
  // the corner pixel leaves the grid under a 45° rotation
  Vector corner = Vector::Zero(w * w);
  corner(0) = 1.0;  // pixel (0, 0)
  CHECK((s * corner).norm() == 0.0);
  // partition of unity: interior rows sum to one
  Vector row_sums = s * Vector::Ones(w * w);
  const double c = (static_cast<double>(w) - 1.0) / 2.0;
  for (Index col = 0; col < w; ++col)
    for (Index row = 0; row < w; ++row) {
      const double dx = static_cast<double>(col) - c;
      const double dy = static_cast<double>(row) - c;
      if (std::sqrt(dx * dx + dy * dy) <= c - 2.0)
        CHECK(row_sums(col * w + row) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("shepp_logan phantom") {
  auto img = shepp_logan(128);
  CHECK(img.minCoeff() >= 0.0);
  CHECK(img.maxCoeff() <= 1.0);

  // analytic oracle at the center pixel: sum the intensities of the ellipses
  // containing that point
  const double step = 2.0 / 128.0;
  const double x = -1.0 + 63.5 * step;
  const double y = 1.0 - 63.5 * step;
  struct E { double v, a, b, x0, y0, phi; };
  const E es[] = {
      {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},       {-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0},
      {-0.2, 0.1100, 0.3100, 0.22, 0.0, -18}, {-0.2, 0.1600, 0.4100, -0.22, 0.0, 18},
      {0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0},  {0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0},
      {0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0},  {0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0},
      {0.1, 0.0230, 0.0230, 0.0, -0.605, 0.0}, {0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0}};
  double expect = 0.0;
  for (const auto& e : es) {
    const double phi = e.phi * std::numbers::pi / 180.0;
    const double dx = x - e.x0, dy = y - e.y0;
    const double xr = dx * std::cos(phi) + dy * std::sin(phi);
    const double yr = -dx * std::sin(phi) + dy * std::cos(phi);
    if (xr * xr / (e.a * e.a) + yr * yr / (e.b * e.b) <= 1.0) expect += e.v;
  }
  CHECK(img(63, 63) == doctest::Approx(expect).epsilon(1e-14));
  CHECK(expect == doctest::Approx(0.2));  // the two nested head ellipses
}

TEST_CASE("add_noise conventions and determinism") {
  auto rng = make_rng(521);
  Vector b = gaussian_vector(200, rng);

  auto sq = add_noise(b, 0.01, NoiseConvention::squared_ratio, 42);
  CHECK(sq.delta.norm() / b.norm() == doctest::Approx(0.1).epsilon(1e-14));
  CHECK((sq.b - b - sq.delta).norm() <= 1e-15 * b.norm());

  auto ra = add_noise(b, 0.05, NoiseConvention::ratio, 42);
  CHECK(ra.delta.norm() / b.norm() == doctest::Approx(0.05).epsilon(1e-14));

  auto again = add_noise(b, 0.01, NoiseConvention::squared_ratio, 42);
  CHECK((again.delta - sq.delta).norm() == 0.0);

  // sample mean near zero at 3σ/sqrt(N)
  Vector big = Vector::Ones(100000);
  auto noisy = add_noise(big, 0.01, NoiseConvention::squared_ratio, 7);
  const double per_entry_std = noisy.delta.norm() / std::sqrt(100000.0);
  CHECK(std::abs(noisy.delta.mean()) <= 3.0 * per_entry_std / std::sqrt(100000.0));
}

TEST_CASE("prior_from_stack") {
  Matrix a = 0.4 * Matrix::Ones(4, 4);
  Matrix b = 0.8 * Matrix::Ones(4, 4);

  auto same = prior_from_stack({a, a, a}, 1);
  CHECK((same.mean - Eigen::Map<Vector>(a.data(), 16)).norm() < 1e-14);

  auto two = prior_from_stack({a, b}, -1);
  CHECK(two.mean(0) == doctest::Approx(0.6));

  // Γ = diag(μ), S = diag(μ) + μμᵀ
  auto prior = prior_from_stack({a, b}, -1);
  Matrix s_expect = prior.mean * prior.mean.transpose();
  s_expect.diagonal() += prior.mean;
  CHECK((prior.second_moment.dense() - s_expect).norm() < 1e-12);

  CHECK_THROWS_AS(prior_from_stack({a}, -1), std::invalid_argument);
  CHECK_THROWS_AS(prior_from_stack({a, b}, 5), std::invalid_argument);
}

TEST_CASE("prior_from_stack exclusion leaves the target out") {
  std::vector<Matrix> stack;
  for (int i = 0; i < 4; ++i) stack.push_back(static_cast<double>(i) * Matrix::Ones(3, 3) / 4.0);
  auto prior = prior_from_stack(stack, 2);
  CHECK(prior.mean(0) == doctest::Approx((0.0 + 0.25 + 0.75) / 3.0));
}

TEST_CASE("build_M_variants") {
  const Index n = 9;
  Matrix img(3, 3);
  img << 0.1, 0.5, 0.2, 0.8, 1.0, 0.3, 0.05, 0.4, 0.6;
  auto prior = prior_from_stack({img, img}, -1);
  auto variants = build_M_variants(prior);
  const Vector mu = prior.mean;

  Matrix s1 = Matrix::Identity(n, n) + mu * mu.transpose();
  CHECK((variants.m1.second_moment.dense() - s1).norm() < 1e-12);
  CHECK((variants.m1.mean - mu).norm() == 0.0);

  Matrix gamma = Matrix(mu.asDiagonal());
  CHECK((variants.m2.second_moment.dense() - gamma).norm() < 1e-12);
  CHECK(variants.m2.mean.norm() == 0.0);

  CHECK((variants.m3.second_moment.dense() - (gamma + mu * mu.transpose())).norm() < 1e-12);

  // μ = 0: variant 1 collapses to the identity prior, 2 and 3 agree
  auto zero_prior = identity_prior(4);
  auto v0 = build_M_variants(zero_prior);
  CHECK((v0.m1.second_moment.dense() - Matrix::Identity(4, 4)).norm() < 1e-12);
  CHECK((v0.m2.second_moment.dense() - v0.m3.second_moment.dense()).norm() < 1e-12);
}

TEST_CASE("richer prior wins under its own objective") {
  // shifted-phantom stack at small scale; closed-form optima per variant
  const Index n_pix = 12;
  std::vector<Matrix> stack;
  Matrix base = shepp_logan(n_pix);
  for (int s = -2; s <= 2; ++s) {
    Matrix shifted = Matrix::Zero(n_pix, n_pix);
    for (Index c = 0; c < n_pix; ++c) {
      Index src = std::clamp<Index>(c + s, 0, n_pix - 1);
      shifted.col(c) = base.col(src);
    }
    stack.push_back(shifted);
  }
  auto prior = prior_from_stack(stack, 2);
  auto variants = build_M_variants(prior);

  auto blur = deblur_problem(n_pix, n_pix, 3);
  const double eta = 0.05;
  Matrix a = blur.op().to_dense();

  auto p1 = make_problem(LinearOperator::from_dense(a), eta, variants.m1);
  auto p3 = make_problem(LinearOperator::from_dense(a), eta, variants.m3);
  const Index r = 4;
  auto z1 = orim_closed_form(p1, r);
  auto z3 = orim_closed_form(p3, r);
  const double f3_own = bayes_risk(p3, z3.Z);
  const double f1_under_3 = bayes_risk(p3, z1.Z);
  CHECK(f3_own <= f1_under_3 + 1e-10 * f1_under_3);
}

}  // TEST_SUITE
