#include "orim/problems.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace orim {

namespace {

constexpr double kPi = std::numbers::pi;

Index reflect_index(Index i, Index n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

}  // namespace

double heat_kernel(double t, double kappa) {
  if (t <= 0) throw std::invalid_argument("heat_kernel: t must be positive");
  if (kappa <= 0) throw std::invalid_argument("heat_kernel: kappa must be positive");
  const double log_k =
      -1.5 * std::log(t) - std::log(2.0 * std::sqrt(kPi) * kappa) - 1.0 / (4.0 * kappa * kappa * t);
  return std::exp(log_k);
}

Matrix heat_problem(const HeatParams& params) {
  if (params.n < 2) throw std::invalid_argument("heat_problem: n must be >= 2");
  if (params.kappa <= 0) throw std::invalid_argument("heat_problem: kappa must be positive");
  const Index n = params.n;
  const double h = 1.0 / static_cast<double>(n);
  // Toeplitz column: value at offset i - j
  Vector column(n);
  for (Index d = 0; d < n; ++d) column(d) = h * heat_kernel((static_cast<double>(d) + 0.5) * h, params.kappa);
  Matrix a = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j <= i; ++j) a(i, j) = column(i - j);
  return a;
}

Matrix dct_matrix(Index n) {
  if (n < 1) throw std::invalid_argument("dct_matrix: n must be positive");
  Matrix c(n, n);
  const double scale0 = std::sqrt(1.0 / static_cast<double>(n));
  const double scale = std::sqrt(2.0 / static_cast<double>(n));
  for (Index k = 0; k < n; ++k)
    for (Index i = 0; i < n; ++i)
      c(k, i) = (k == 0 ? scale0 : scale) *
                std::cos(kPi * static_cast<double>(k) * (2.0 * static_cast<double>(i) + 1.0) /
                         (2.0 * static_cast<double>(n)));
  return c;
}

Vector DeblurProblem::apply_filter(const Vector& x, const Matrix& filter) const {
  if (x.size() != pixels()) throw std::invalid_argument("DeblurProblem: vector size mismatch");
  Eigen::Map<const Matrix> img(x.data(), rows, cols);
  Matrix out = inverse_transform(filter.cwiseProduct(transform(img)));
  return Eigen::Map<Vector>(out.data(), pixels());
}

LinearOperator DeblurProblem::filter_operator(Matrix filter) const {
  auto self = std::make_shared<DeblurProblem>(*this);
  auto f = std::make_shared<Matrix>(std::move(filter));
  auto apply = [self, f](const Vector& x) { return self->apply_filter(x, *f); };
  return LinearOperator(pixels(), pixels(), apply, apply);  // real filter: symmetric
}

Matrix DeblurProblem::tikhonov_filter(double eta) const {
  return spectrum.unaryExpr([eta](double s) { return s / (s * s + eta * eta); });
}

DeblurProblem deblur_problem(Index rows, Index cols, Index psf_size) {
  if (psf_size % 2 == 0) throw std::invalid_argument("deblur_problem: psf size must be odd");
  if (psf_size > std::min(rows, cols)) throw std::invalid_argument("deblur_problem: psf larger than image");

  DeblurProblem p;
  p.rows = rows;
  p.cols = cols;
  p.psf = Matrix::Constant(psf_size, psf_size, 1.0 / static_cast<double>(psf_size * psf_size));
  p.C_row = dct_matrix(rows);
  p.C_col = dct_matrix(cols);

  // Fold the centered PSF into the corner: the reflexive-boundary spectrum is
  // dct2(fold(PSF)) ./ dct2(e1), elementwise.
  const Index k = (psf_size - 1) / 2;
  const Index s = psf_size;
  Matrix z1 = Matrix::Zero(s, s);
  Matrix z2 = Matrix::Zero(s, s);
  for (Index i = 0; i + k < s; ++i) z1(i, i + k) = 1.0;
  for (Index i = 0; i + k + 1 < s; ++i) z2(i, i + k + 1) = 1.0;
  Matrix folded = z1 * p.psf * z1.transpose() + z1 * p.psf * z2.transpose() +
                  z2 * p.psf * z1.transpose() + z2 * p.psf * z2.transpose();

  Matrix embedded = Matrix::Zero(rows, cols);
  embedded.topLeftCorner(s, s) = folded;

  Matrix numerator = p.transform(embedded);
  Matrix denominator = p.C_row.col(0) * p.C_col.col(0).transpose();  // dct2(e1)
  p.spectrum = numerator.cwiseQuotient(denominator);
  return p;
}

Matrix reflexive_convolve(const Matrix& img, const Matrix& psf) {
  const Index k = (psf.rows() - 1) / 2;
  Matrix out = Matrix::Zero(img.rows(), img.cols());
  for (Index i = 0; i < img.rows(); ++i)
    for (Index j = 0; j < img.cols(); ++j) {
      double acc = 0.0;
      for (Index a = 0; a < psf.rows(); ++a)
        for (Index b = 0; b < psf.cols(); ++b) {
          const Index src_i = reflect_index(i + a - k, img.rows());
          const Index src_j = reflect_index(j + b - k, img.cols());
          acc += psf(a, b) * img(src_i, src_j);
        }
      out(i, j) = acc;
    }
  return out;
}

SparseMatrix rotation_matrix(Index width, double angle_deg) {
  const double theta = angle_deg * kPi / 180.0;
  const double ct = std::cos(theta);
  const double st = std::sin(theta);
  const double center = (static_cast<double>(width) - 1.0) / 2.0;

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(width) * width * 4);

  for (Index tc = 0; tc < width; ++tc) {
    for (Index tr = 0; tr < width; ++tr) {
      // image coordinates, y up
      const double x = static_cast<double>(tc) - center;
      const double y = center - static_cast<double>(tr);
      // sample the source at the inverse rotation of the target
      const double xs = ct * x + st * y;
      const double ys = -st * x + ct * y;
      const double src_col = xs + center;
      const double src_row = center - ys;

      const double fc = std::floor(src_col);
      const double fr = std::floor(src_row);
      const double wc = src_col - fc;
      const double wr = src_row - fr;
      const Index target = tc * width + tr;

      const double weights[4] = {(1 - wr) * (1 - wc), (1 - wr) * wc, wr * (1 - wc), wr * wc};
      const Index rr[4] = {static_cast<Index>(fr), static_cast<Index>(fr), static_cast<Index>(fr) + 1,
                           static_cast<Index>(fr) + 1};
      const Index cc[4] = {static_cast<Index>(fc), static_cast<Index>(fc) + 1, static_cast<Index>(fc),
                           static_cast<Index>(fc) + 1};
      for (int t = 0; t < 4; ++t) {
        if (weights[t] <= 1e-15) continue;
        if (rr[t] < 0 || rr[t] >= width || cc[t] < 0 || cc[t] >= width) continue;
        triplets.emplace_back(target, cc[t] * width + rr[t], weights[t]);
      }
    }
  }
  SparseMatrix s(width * width, width * width);
  s.setFromTriplets(triplets.begin(), triplets.end());
  s.makeCompressed();
  return s;
}

TomoProblem tomo_problem(Index n_pix, std::vector<double> angles_deg) {
  if (n_pix < 8) throw std::invalid_argument("tomo_problem: n_pix must be >= 8");
  if (angles_deg.empty()) throw std::invalid_argument("tomo_problem: need at least one angle");

  TomoProblem p;
  p.n_pix = n_pix;
  p.pad = static_cast<Index>(std::ceil(static_cast<double>(n_pix) * (std::sqrt(2.0) - 1.0) / 2.0));
  p.width = n_pix + 2 * p.pad;
  p.angles_deg = std::move(angles_deg);

  const Index w = p.width;
  const double h = 1.0 / static_cast<double>(w);  // pixel width

  // R = h (I_w ⊗ 1ᵀ): detector bin c sums column c (column-major layout)
  std::vector<Eigen::Triplet<double>> rtrip;
  rtrip.reserve(static_cast<std::size_t>(w) * w);
  for (Index c = 0; c < w; ++c)
    for (Index r = 0; r < w; ++r) rtrip.emplace_back(c, c * w + r, h);
  SparseMatrix rmat(w, w * w);
  rmat.setFromTriplets(rtrip.begin(), rtrip.end());

  const Index n_angles = static_cast<Index>(p.angles_deg.size());
  std::vector<Eigen::Triplet<double>> atrip;
  for (Index j = 0; j < n_angles; ++j) {
    SparseMatrix block = rmat * rotation_matrix(w, p.angles_deg[static_cast<std::size_t>(j)]);
    for (Index outer = 0; outer < block.outerSize(); ++outer)
      for (SparseMatrix::InnerIterator it(block, outer); it; ++it)
        atrip.emplace_back(j * w + it.row(), it.col(), it.value());
  }
  p.A = SparseMatrix(n_angles * w, w * w);
  p.A.setFromTriplets(atrip.begin(), atrip.end());
  p.A.makeCompressed();
  return p;
}

Vector TomoProblem::embed(const Matrix& image) const {
  if (image.rows() != n_pix || image.cols() != n_pix)
    throw std::invalid_argument("TomoProblem::embed: image size mismatch");
  Matrix padded = Matrix::Zero(width, width);
  padded.block(pad, pad, n_pix, n_pix) = image;
  return Eigen::Map<Vector>(padded.data(), pixels());
}

Matrix shepp_logan(Index n_pix) {
  if (n_pix < 8) throw std::invalid_argument("shepp_logan: n_pix must be >= 8");
  struct Ellipse {
    double value, a, b, x0, y0, phi_deg;
  };
  // ten-ellipse head phantom, modified intensities
  const Ellipse ellipses[] = {
      {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},       {-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0},
      {-0.2, 0.1100, 0.3100, 0.22, 0.0, -18}, {-0.2, 0.1600, 0.4100, -0.22, 0.0, 18},
      {0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0},  {0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0},
      {0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0},  {0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0},
      {0.1, 0.0230, 0.0230, 0.0, -0.605, 0.0}, {0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0},
  };

  Matrix img = Matrix::Zero(n_pix, n_pix);
  const double step = 2.0 / static_cast<double>(n_pix);
  for (Index r = 0; r < n_pix; ++r) {
    const double y = 1.0 - (static_cast<double>(r) + 0.5) * step;
    for (Index c = 0; c < n_pix; ++c) {
      const double x = -1.0 + (static_cast<double>(c) + 0.5) * step;
      double v = 0.0;
      for (const auto& e : ellipses) {
        const double phi = e.phi_deg * kPi / 180.0;
        const double dx = x - e.x0;
        const double dy = y - e.y0;
        const double xr = dx * std::cos(phi) + dy * std::sin(phi);
        const double yr = -dx * std::sin(phi) + dy * std::cos(phi);
        if ((xr * xr) / (e.a * e.a) + (yr * yr) / (e.b * e.b) <= 1.0) v += e.value;
      }
      img(r, c) = std::clamp(v, 0.0, 1.0);
    }
  }
  return img;
}

NoisyData add_noise(const Vector& b_clean, double level, NoiseConvention convention,
                    std::uint64_t seed) {
  if (level <= 0) throw std::invalid_argument("add_noise: level must be positive");
  const double b_norm = b_clean.norm();
  if (b_norm == 0.0) throw std::invalid_argument("add_noise: clean data must be nonzero");

  auto rng = make_rng(seed);
  Vector delta = gaussian_vector(b_clean.size(), rng);
  const double target =
      convention == NoiseConvention::squared_ratio ? std::sqrt(level) * b_norm : level * b_norm;
  delta *= target / delta.norm();
  return NoisyData{b_clean + delta, std::move(delta)};
}

PriorModel prior_from_stack(const std::vector<Matrix>& images, Index exclude) {
  if (images.size() < 2) throw std::invalid_argument("prior_from_stack: need at least two images");
  if (exclude >= static_cast<Index>(images.size()))
    throw std::invalid_argument("prior_from_stack: exclude index out of range");
  const Index rows = images.front().rows();
  const Index cols = images.front().cols();
  Vector mu = Vector::Zero(rows * cols);
  Index used = 0;
  for (Index i = 0; i < static_cast<Index>(images.size()); ++i) {
    const Matrix& img = images[static_cast<std::size_t>(i)];
    if (img.rows() != rows || img.cols() != cols)
      throw std::invalid_argument("prior_from_stack: image dimensions differ");
    if (i == exclude) continue;
    mu += Eigen::Map<const Vector>(img.data(), rows * cols);
    ++used;
  }
  if (used == 0) throw std::invalid_argument("prior_from_stack: no images left after exclusion");
  mu /= static_cast<double>(used);

  Vector d = mu.cwiseMax(0.0);  // Γ = diag(μ); clamp guards tiny negative pixels
  PriorModel prior;
  prior.mean = mu;
  prior.second_moment = SymmetricOperator::diag_plus_rank1(d, mu);
  Vector sq = d.cwiseSqrt();
  prior.cov_factor = LinearOperator(
      rows * cols, rows * cols, [sq](const Vector& z) -> Vector { return sq.cwiseProduct(z); },
      [sq](const Vector& z) -> Vector { return sq.cwiseProduct(z); });
  return prior;
}

MVariants build_M_variants(const PriorModel& prior) {
  const Index n = prior.size();
  const Vector& mu = prior.mean;

  MVariants out;

  // (1): covariance I, mean μ
  out.m1.mean = mu;
  out.m1.second_moment = SymmetricOperator::diag_plus_rank1(Vector::Ones(n), mu);
  out.m1.cov_factor = LinearOperator::identity(n);

  // (2): covariance Γ, zero mean
  const Vector* d = prior.second_moment.diag_part();
  const Vector* u = prior.second_moment.rank1_part();
  if (d != nullptr && u != nullptr && (*u - mu).norm() <= 1e-12 * std::max(1.0, mu.norm())) {
    out.m2.second_moment = SymmetricOperator::diag_plus_rank1(*d, Vector::Zero(n));
    Vector sq = d->cwiseSqrt();
    out.m2.cov_factor = LinearOperator(
        n, n, [sq](const Vector& z) -> Vector { return sq.cwiseProduct(z); },
        [sq](const Vector& z) -> Vector { return sq.cwiseProduct(z); });
  } else {
    Matrix gamma = prior.second_moment.dense() - mu * mu.transpose();
    out.m2.second_moment = SymmetricOperator::from_dense(0.5 * (gamma + gamma.transpose()));
    out.m2.cov_factor = out.m2.second_moment.factor();
  }
  out.m2.mean = Vector::Zero(n);

  // (3): the prior itself
  out.m3 = prior;
  return out;
}

}  // namespace orim
