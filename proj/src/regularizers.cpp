#include "orim/regularizers.hpp"

#include <Eigen/SVD>

#include <memory>
#include <stdexcept>

namespace orim {

namespace {

bool strict_gap(double larger, double smaller, double scale) {
  return (larger - smaller) > 1e-12 * std::max(scale, 1e-300);
}

}  // namespace

Index RegularizedInverse::rows() const {
  if (dense) return dense->rows();
  if (spectral) return spectral->V.rows();
  if (low_rank) return low_rank->rows();
  if (gk) return gk->Q.rows();
  return 0;
}

Index RegularizedInverse::cols() const {
  if (dense) return dense->cols();
  if (spectral) return spectral->U.rows();
  if (low_rank) return low_rank->cols();
  if (gk) return gk->W.rows();
  return 0;
}

Vector RegularizedInverse::apply(const Vector& b) const {
  if (dense) return (*dense) * b;
  if (spectral) return spectral->V * spectral->filter.cwiseProduct(spectral->U.transpose() * b);
  if (low_rank) return low_rank->apply(b);
  if (gk) return gk->Q * (gk->B_pinv * (gk->W.transpose() * b));
  throw std::logic_error("RegularizedInverse: empty representation");
}

Vector RegularizedInverse::apply_transpose(const Vector& v) const {
  if (dense) return dense->transpose() * v;
  if (spectral) return spectral->U * spectral->filter.cwiseProduct(spectral->V.transpose() * v);
  if (low_rank) return low_rank->apply_transpose(v);
  if (gk) return gk->W * (gk->B_pinv.transpose() * (gk->Q.transpose() * v));
  throw std::logic_error("RegularizedInverse: empty representation");
}

Matrix RegularizedInverse::to_dense() const {
  if (dense) return *dense;
  if (spectral) return spectral->V * spectral->filter.asDiagonal() * spectral->U.transpose();
  if (low_rank) return low_rank->to_dense();
  if (gk) return gk->Q * gk->B_pinv * gk->W.transpose();
  throw std::logic_error("RegularizedInverse: empty representation");
}

LinearOperator RegularizedInverse::as_operator() const {
  if (dense) return LinearOperator::from_dense(*dense);
  auto self = std::make_shared<RegularizedInverse>(*this);
  return LinearOperator(
      rows(), cols(), [self](const Vector& b) { return self->apply(b); },
      [self](const Vector& v) { return self->apply_transpose(v); });
}

FtResult friedland_torokhti(const Matrix& b, const Matrix& c, Index r) {
  if (b.cols() != c.cols()) throw std::invalid_argument("friedland_torokhti: column mismatch");
  if (r < 1) throw std::invalid_argument("friedland_torokhti: rank must be >= 1");

  Eigen::BDCSVD<Matrix> csvd(c, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Index k = numerical_rank(csvd.singularValues(), c.rows(), c.cols());
  if (k == 0) return FtResult{Matrix::Zero(b.rows(), c.rows()), true};

  const Matrix vk = csvd.matrixV().leftCols(k);
  const Matrix bvv = (b * vk) * vk.transpose();

  Eigen::BDCSVD<Matrix> bsvd(bvv, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Index rank_bvv = numerical_rank(bsvd.singularValues(), bvv.rows(), bvv.cols());
  const Index rr = std::min<Index>(r, bsvd.singularValues().size());
  const Matrix bvv_r = bsvd.matrixU().leftCols(rr) * bsvd.singularValues().head(rr).asDiagonal() *
                       bsvd.matrixV().leftCols(rr).transpose();

  const Matrix c_pinv = vk * csvd.singularValues().head(k).cwiseInverse().asDiagonal() *
                        csvd.matrixU().leftCols(k).transpose();

  FtResult out;
  out.Z = bvv_r * c_pinv;
  out.unique = r >= rank_bvv ||
               strict_gap(bsvd.singularValues()(r - 1), bsvd.singularValues()(r),
                          bsvd.singularValues()(0));
  return out;
}

ClosedFormIntermediates orim_intermediates(const InverseProblem& problem) {
  problem.validate();
  const Matrix a = problem.forward.to_dense();
  const Matrix p = problem.initial_inverse.to_dense();
  const double eta2 = problem.eta * problem.eta;

  Matrix sat = problem.prior.second_moment.apply(Matrix(a.transpose()));  // S Aᵀ, n x m
  Matrix g = a * sat;
  g.diagonal().array() += eta2;

  Matrix f = sat - p * g;  // (I - PA) S Aᵀ - η² P

  SpdFactorization chol(g);  // throws when G is not SPD
  Matrix ginv_ft = chol.solve(Matrix(f.transpose()));
  Matrix h = f * ginv_ft;
  h = 0.5 * (h + h.transpose());

  ClosedFormIntermediates im;
  im.rank_F = numerical_rank(Eigen::BDCSVD<Matrix>(f).singularValues(), f.rows(), f.cols());
  im.F = std::move(f);
  im.G = std::move(g);
  im.eig = symmetric_eig(h);
  im.H = std::move(h);
  im.Ginv_Ft = std::move(ginv_ft);
  return im;
}

RankSlice orim_from_intermediates(const ClosedFormIntermediates& im, Index r) {
  const Index n = im.H.rows();
  if (r < 1 || r > n) throw std::invalid_argument("orim_from_intermediates: rank out of range");
  if (im.rank_F < r) throw std::invalid_argument("orim_from_intermediates: rank(F) below requested rank");

  RankSlice out;
  out.Z.X = im.eig.U.leftCols(r);
  out.Z.Y = im.Ginv_Ft * out.Z.X;
  const double scale = std::max(std::abs(im.eig.eigenvalues(0)), 1e-300);
  out.unique = (r == n) || strict_gap(im.eig.eigenvalues(r - 1), im.eig.eigenvalues(r), scale);
  return out;
}

ClosedFormOrim orim_closed_form(const InverseProblem& problem, Index r) {
  problem.validate(r);
  ClosedFormOrim out;
  out.intermediates = orim_intermediates(problem);
  auto slice = orim_from_intermediates(out.intermediates, r);
  out.Z = std::move(slice.Z);
  out.unique = slice.unique;
  return out;
}

RegularizedInverse tsvd_inverse(const Matrix& a, Index r) {
  if (r < 1 || r > std::min(a.rows(), a.cols()))
    throw std::invalid_argument("tsvd_inverse: rank out of range");
  Eigen::BDCSVD<Matrix> dec(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = dec.singularValues();
  if (numerical_rank(s, a.rows(), a.cols()) < r)
    throw std::invalid_argument("tsvd_inverse: rank exceeds the numerical rank of A");

  RegularizedInverse out;
  out.kind = InverseKind::tsvd;
  out.spectral = SpectralRep{dec.matrixU().leftCols(r), s.head(r).cwiseInverse(), dec.matrixV().leftCols(r)};
  out.unique = (r == s.size()) || strict_gap(s(r - 1), s(r), s(0));
  return out;
}

RegularizedInverse truncated_tikhonov(const Matrix& a, Index r, double eta) {
  if (r < 1 || r > std::min(a.rows(), a.cols()))
    throw std::invalid_argument("truncated_tikhonov: rank out of range");
  if (eta < 0) throw std::invalid_argument("truncated_tikhonov: eta must be nonnegative");
  Eigen::BDCSVD<Matrix> dec(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = dec.singularValues();
  if (numerical_rank(s, a.rows(), a.cols()) < r)
    throw std::invalid_argument("truncated_tikhonov: rank exceeds the numerical rank of A");

  Vector filter(r);
  for (Index i = 0; i < r; ++i) filter(i) = s(i) / (s(i) * s(i) + eta * eta);

  RegularizedInverse out;
  out.kind = InverseKind::truncated_tikhonov;
  out.spectral = SpectralRep{dec.matrixU().leftCols(r), std::move(filter), dec.matrixV().leftCols(r)};
  out.unique = (r == s.size()) || strict_gap(s(r - 1), s(r), s(0));
  return out;
}

RegularizedInverse tikhonov_inverse(const Matrix& a, double eta) {
  if (eta <= 0) throw std::invalid_argument("tikhonov_inverse: eta must be positive");
  Eigen::BDCSVD<Matrix> dec(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = dec.singularValues();
  Vector filter(s.size());
  for (Index i = 0; i < s.size(); ++i) filter(i) = s(i) / (s(i) * s(i) + eta * eta);

  RegularizedInverse out;
  out.kind = InverseKind::tikhonov;
  out.spectral = SpectralRep{dec.matrixU(), std::move(filter), dec.matrixV()};
  return out;
}

RegularizedInverse orim0_inverse(const Matrix& a, const Matrix& m_xi, double eta, Index r) {
  if (m_xi.rows() != a.cols()) throw std::invalid_argument("orim0_inverse: M_xi dimension mismatch");

  PriorModel prior;
  prior.mean = Vector::Zero(a.cols());
  prior.second_moment = SymmetricOperator::from_dense(m_xi * m_xi.transpose());
  Matrix factor(m_xi.rows(), m_xi.cols() + 1);
  factor.leftCols(m_xi.cols()) = m_xi;
  factor.col(m_xi.cols()).setZero();
  prior.factor = std::move(factor);
  prior.cov_factor = LinearOperator::from_dense(m_xi);

  auto cf = orim_closed_form(make_problem(LinearOperator::from_dense(a), eta, std::move(prior)), r);

  RegularizedInverse out;
  out.kind = InverseKind::orim0;
  out.low_rank = std::move(cf.Z);
  out.unique = cf.unique;
  return out;
}

ExtendedSvd extended_svd(const Matrix& a, double eta) {
  if (eta < 0) throw std::invalid_argument("extended_svd: eta must be nonnegative");
  const Index m = a.rows();
  const Index n = a.cols();
  auto dec = svd(a);

  Vector d(m);
  const Index nsv = dec.singular_values.size();  // min(m, n)
  for (Index i = 0; i < m; ++i) {
    const double sigma = i < nsv ? dec.singular_values(i) : 0.0;
    d(i) = i < nsv ? std::hypot(sigma, eta) : eta;
  }
  if (d.minCoeff() <= 0.0)
    throw std::invalid_argument("extended_svd: D is singular (eta = 0 with rank-deficient A)");

  Matrix sigma_t = Matrix::Zero(n, m);
  for (Index i = 0; i < nsv; ++i) sigma_t(i, i) = dec.singular_values(i);

  ExtendedSvd out;
  out.V11 = dec.V * sigma_t * d.cwiseInverse().asDiagonal();
  out.V21 = eta * dec.U * d.cwiseInverse().asDiagonal();
  out.U = std::move(dec.U);
  out.D = std::move(d);
  return out;
}

RegularizedInverse golub_kahan_inverse(const LinearOperator& a, const Vector& b, Index k) {
  auto bd = golub_kahan(a, b, k);
  GkRep rep;
  rep.B = bd.bidiagonal();
  rep.B_pinv = pseudoinverse(rep.B);
  rep.Q = std::move(bd.Q);
  rep.W = std::move(bd.W);
  rep.breakdown = bd.breakdown;

  RegularizedInverse out;
  out.kind = InverseKind::golub_kahan_lsqr;
  out.gk = std::move(rep);
  return out;
}

}  // namespace orim
