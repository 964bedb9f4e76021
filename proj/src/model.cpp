#include "orim/model.hpp"

#include <stdexcept>
#include <utility>

namespace orim {

SymmetricOperator SymmetricOperator::identity(Index n) {
  SymmetricOperator s;
  s.kind_ = Kind::Identity;
  s.n_ = n;
  return s;
}

SymmetricOperator SymmetricOperator::diag_plus_rank1(Vector d, Vector u) {
  if (d.size() != u.size()) throw std::invalid_argument("diag_plus_rank1: size mismatch");
  if (d.minCoeff() < 0) throw std::invalid_argument("diag_plus_rank1: diagonal must be nonnegative");
  SymmetricOperator s;
  s.kind_ = Kind::DiagRank1;
  s.n_ = d.size();
  s.d_ = std::move(d);
  s.u_ = std::move(u);
  return s;
}

SymmetricOperator SymmetricOperator::from_dense(Matrix m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("SymmetricOperator: matrix must be square");
  SymmetricOperator s;
  s.kind_ = Kind::Dense;
  s.n_ = m.rows();
  auto eig = symmetric_eig(m);
  const double lmax = std::max(eig.eigenvalues(0), 0.0);
  if (eig.eigenvalues.minCoeff() < -1e-10 * std::max(lmax, 1e-300))
    throw std::invalid_argument("SymmetricOperator: matrix is not positive semidefinite");
  s.rank_gap_ = lmax > 0 ? eig.eigenvalues(s.n_ - 1) / lmax : 0.0;
  s.factor_ = eig.U * eig.eigenvalues.cwiseMax(0.0).cwiseSqrt().asDiagonal();
  s.dense_ = std::move(m);
  return s;
}

Vector SymmetricOperator::apply(const Vector& x) const {
  switch (kind_) {
    case Kind::Identity:
      return x;
    case Kind::DiagRank1:
      return d_.cwiseProduct(x) + u_ * u_.dot(x);
    case Kind::Dense:
      return dense_ * x;
  }
  return x;
}

Matrix SymmetricOperator::apply(const Matrix& x) const {
  switch (kind_) {
    case Kind::Identity:
      return x;
    case Kind::DiagRank1:
      return d_.asDiagonal() * x + u_ * (u_.transpose() * x);
    case Kind::Dense:
      return dense_ * x;
  }
  return x;
}

Vector SymmetricOperator::apply_basis(Index j) const {
  if (j < 0 || j >= n_) throw std::invalid_argument("SymmetricOperator::apply_basis: index out of range");
  Vector col = Vector::Zero(n_);
  switch (kind_) {
    case Kind::Identity:
      col(j) = 1.0;
      return col;
    case Kind::DiagRank1:
      col = u_ * u_(j);
      col(j) += d_(j);
      return col;
    case Kind::Dense:
      return dense_.col(j);
  }
  return col;
}

double SymmetricOperator::trace() const {
  switch (kind_) {
    case Kind::Identity:
      return static_cast<double>(n_);
    case Kind::DiagRank1:
      return d_.sum() + u_.squaredNorm();
    case Kind::Dense:
      return dense_.trace();
  }
  return 0.0;
}

Matrix SymmetricOperator::dense() const {
  switch (kind_) {
    case Kind::Identity:
      return Matrix::Identity(n_, n_);
    case Kind::DiagRank1: {
      Matrix s = u_ * u_.transpose();
      s.diagonal() += d_;
      return s;
    }
    case Kind::Dense:
      return dense_;
  }
  return Matrix();
}

LinearOperator SymmetricOperator::factor() const {
  switch (kind_) {
    case Kind::Identity:
      return LinearOperator::identity(n_);
    case Kind::DiagRank1: {
      // L = [diag(sqrt(d))  u], n x (n+1)
      Vector sq = d_.cwiseSqrt();
      Vector u = u_;
      const Index n = n_;
      return LinearOperator(
          n, n + 1,
          [sq, u, n](const Vector& z) -> Vector { return sq.cwiseProduct(z.head(n)) + u * z(n); },
          [sq, u, n](const Vector& x) -> Vector {
            Vector out(n + 1);
            out.head(n) = sq.cwiseProduct(x);
            out(n) = u.dot(x);
            return out;
          });
    }
    case Kind::Dense:
      return LinearOperator::from_dense(factor_);
  }
  return LinearOperator::identity(n_);
}

PriorModel identity_prior(Index n) {
  PriorModel prior;
  prior.mean = Vector::Zero(n);
  prior.second_moment = SymmetricOperator::identity(n);
  prior.cov_factor = LinearOperator::identity(n);
  return prior;
}

PriorModel prior_from_mean_cov(const Vector& mean, const Matrix& cov) {
  if (cov.rows() != cov.cols() || cov.rows() != mean.size())
    throw std::invalid_argument("prior_from_mean_cov: dimension mismatch");
  Matrix s = cov + mean * mean.transpose();
  auto op = SymmetricOperator::from_dense(std::move(s));
  if (op.relative_rank_gap() <= 1e-12)
    throw std::invalid_argument("prior_from_mean_cov: second moment is rank deficient");

  PriorModel prior;
  prior.mean = mean;
  prior.second_moment = std::move(op);
  auto cov_eig = symmetric_eig(cov);
  prior.cov_factor =
      LinearOperator::from_dense(cov_eig.U * cov_eig.eigenvalues.cwiseMax(0.0).cwiseSqrt().asDiagonal());
  return prior;
}

PriorModel prior_from_factor(const Vector& mean, const Matrix& m_xi) {
  if (m_xi.rows() != mean.size()) throw std::invalid_argument("prior_from_factor: dimension mismatch");
  Matrix m(mean.size(), m_xi.cols() + 1);
  m.leftCols(m_xi.cols()) = m_xi;
  m.col(m_xi.cols()) = mean;

  PriorModel prior;
  prior.mean = mean;
  prior.second_moment = SymmetricOperator::from_dense(m * m.transpose());
  prior.factor = std::move(m);
  prior.cov_factor = LinearOperator::from_dense(m_xi);
  return prior;
}

LinearOperator zero_initial_inverse(Index n, Index m) { return LinearOperator::zero(n, m); }

void InverseProblem::validate(Index requested_rank) const {
  const Index m = data_size();
  const Index n = solution_size();
  if (prior.size() != n) throw std::invalid_argument("InverseProblem: prior dimension mismatch");
  if (initial_inverse.rows() != n || initial_inverse.cols() != m)
    throw std::invalid_argument("InverseProblem: initial inverse dimension mismatch");
  if (eta < 0) throw std::invalid_argument("InverseProblem: eta must be nonnegative");
  if (requested_rank >= 0 && requested_rank < m && eta == 0.0)
    throw std::invalid_argument("InverseProblem: eta must be positive when rank < m");
}

InverseProblem make_problem(LinearOperator forward, double eta, PriorModel prior,
                            std::optional<LinearOperator> initial_inverse) {
  InverseProblem p;
  p.eta = eta;
  p.initial_inverse =
      initial_inverse ? std::move(*initial_inverse) : zero_initial_inverse(forward.cols(), forward.rows());
  p.forward = std::move(forward);
  p.prior = std::move(prior);
  p.validate();
  return p;
}

void LowRankMatrix::append(const Vector& x, const Vector& y) {
  X.conservativeResize(x.size(), X.cols() + 1);
  X.col(X.cols() - 1) = x;
  Y.conservativeResize(y.size(), Y.cols() + 1);
  Y.col(Y.cols() - 1) = y;
}

}  // namespace orim
