#pragma once

#include <functional>
#include <memory>

#include "orim/types.hpp"

namespace orim {

// Matrix-free operator: all algorithms touch A and P only through products.
// A dense or sparse payload, when present, enables fast densification and
// column extraction without changing the calling code.
class LinearOperator {
 public:
  using ApplyFn = std::function<Vector(const Vector&)>;

  LinearOperator() = default;
  LinearOperator(Index rows, Index cols, ApplyFn apply, ApplyFn apply_transpose);

  static LinearOperator from_dense(Matrix a);
  static LinearOperator from_sparse(SparseMatrix a);
  static LinearOperator zero(Index rows, Index cols);
  static LinearOperator identity(Index n);

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }

  Vector apply(const Vector& x) const;
  Vector apply_transpose(const Vector& y) const;

  /// Column j, i.e. apply(e_j); cheap for dense/sparse payloads.
  Vector apply_basis(Index j) const;

  bool is_zero() const { return zero_; }
  bool has_storage() const { return dense_ != nullptr || sparse_ != nullptr; }
  const Matrix* dense_ptr() const { return dense_.get(); }
  const SparseMatrix* sparse_ptr() const { return sparse_.get(); }

  /// Materializes the matrix; applies to unit vectors when no payload is stored.
  Matrix to_dense() const;

 private:
  Index rows_ = 0;
  Index cols_ = 0;
  ApplyFn apply_;
  ApplyFn apply_t_;
  std::shared_ptr<const Matrix> dense_;
  std::shared_ptr<const SparseMatrix> sparse_;
  bool zero_ = false;
};

/// Randomized <Au, v> == <u, Aᵀv> check; returns worst relative mismatch.
double adjoint_mismatch(const LinearOperator& op, int trials, Rng& rng);

}  // namespace orim
