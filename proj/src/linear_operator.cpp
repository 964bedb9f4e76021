#include "orim/linear_operator.hpp"

#include <stdexcept>

namespace orim {

LinearOperator::LinearOperator(Index rows, Index cols, ApplyFn apply, ApplyFn apply_transpose)
    : rows_(rows), cols_(cols), apply_(std::move(apply)), apply_t_(std::move(apply_transpose)) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("LinearOperator: dimensions must be positive");
}

LinearOperator LinearOperator::from_dense(Matrix a) {
  auto shared = std::make_shared<const Matrix>(std::move(a));
  LinearOperator op(shared->rows(), shared->cols(),
                    [shared](const Vector& x) -> Vector { return (*shared) * x; },
                    [shared](const Vector& y) -> Vector { return shared->transpose() * y; });
  op.dense_ = shared;
  return op;
}

LinearOperator LinearOperator::from_sparse(SparseMatrix a) {
  a.makeCompressed();
  auto shared = std::make_shared<const SparseMatrix>(std::move(a));
  LinearOperator op(shared->rows(), shared->cols(),
                    [shared](const Vector& x) -> Vector { return (*shared) * x; },
                    [shared](const Vector& y) -> Vector { return shared->transpose() * y; });
  op.sparse_ = shared;
  return op;
}

LinearOperator LinearOperator::zero(Index rows, Index cols) {
  LinearOperator op(rows, cols,
                    [rows](const Vector&) -> Vector { return Vector::Zero(rows); },
                    [cols](const Vector&) -> Vector { return Vector::Zero(cols); });
  op.zero_ = true;
  return op;
}

LinearOperator LinearOperator::identity(Index n) {
  return LinearOperator(n, n,
                        [](const Vector& x) -> Vector { return x; },
                        [](const Vector& y) -> Vector { return y; });
}

Vector LinearOperator::apply(const Vector& x) const {
  if (x.size() != cols_) throw std::invalid_argument("LinearOperator::apply: size mismatch");
  return apply_(x);
}

Vector LinearOperator::apply_transpose(const Vector& y) const {
  if (y.size() != rows_) throw std::invalid_argument("LinearOperator::apply_transpose: size mismatch");
  return apply_t_(y);
}

Vector LinearOperator::apply_basis(Index j) const {
  if (j < 0 || j >= cols_) throw std::invalid_argument("LinearOperator::apply_basis: index out of range");
  if (zero_) return Vector::Zero(rows_);
  if (dense_) return dense_->col(j);
  if (sparse_) return sparse_->col(j);
  Vector e = Vector::Zero(cols_);
  e(j) = 1.0;
  return apply_(e);
}

Matrix LinearOperator::to_dense() const {
  if (dense_) return *dense_;
  if (sparse_) return Matrix(*sparse_);
  if (zero_) return Matrix::Zero(rows_, cols_);
  Matrix a(rows_, cols_);
  for (Index j = 0; j < cols_; ++j) a.col(j) = apply_basis(j);
  return a;
}

double adjoint_mismatch(const LinearOperator& op, int trials, Rng& rng) {
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    Vector u = gaussian_vector(op.cols(), rng);
    Vector v = gaussian_vector(op.rows(), rng);
    const double lhs = op.apply(u).dot(v);
    const double rhs = u.dot(op.apply_transpose(v));
    const double scale = std::max({std::abs(lhs), std::abs(rhs), 1e-300});
    worst = std::max(worst, std::abs(lhs - rhs) / scale);
  }
  return worst;
}

}  // namespace orim
