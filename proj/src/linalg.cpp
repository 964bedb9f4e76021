#include "orim/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace orim {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

void require_finite(const Matrix& a, const char* who) {
  if (!a.allFinite()) throw std::invalid_argument(std::string(who) + ": input has non-finite entries");
}

// Classical Gram-Schmidt, applied twice, against the first ncols columns of basis.
void reorthogonalize(Vector& v, const Matrix& basis, Index ncols) {
  if (ncols == 0) return;
  const auto block = basis.leftCols(ncols);
  v -= block * (block.transpose() * v);
  v -= block * (block.transpose() * v);
}

// Returns a unit vector orthogonal to the first ncols columns of basis, or a
// zero vector when the basis already spans the whole space.
Vector orthonormal_completion(const Matrix& basis, Index ncols) {
  const Index m = basis.rows();
  if (ncols >= m) return Vector::Zero(m);
  for (Index trial = 0; trial < m; ++trial) {
    Vector e = Vector::Zero(m);
    e(trial) = 1.0;
    reorthogonalize(e, basis, ncols);
    const double nrm = e.norm();
    if (nrm > 0.1) return e / nrm;
  }
  return Vector::Zero(m);
}

}  // namespace

Matrix Bidiagonalization::bidiagonal() const {
  const Index k = alphas.size();
  Matrix b = Matrix::Zero(k + 1, k);
  for (Index i = 0; i < k; ++i) {
    b(i, i) = alphas(i);
    b(i + 1, i) = betas(i + 1);
  }
  return b;
}

SvdResult svd(const Matrix& a) {
  require_finite(a, "svd");
  Eigen::BDCSVD<Matrix> dec(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (dec.info() != Eigen::Success) throw std::runtime_error("svd: factorization failed to converge");
  return SvdResult{dec.matrixU(), dec.singularValues(), dec.matrixV()};
}

TruncatedSvd truncated_svd(const Matrix& a, Index r) {
  require_finite(a, "truncated_svd");
  if (r < 1 || r > std::min(a.rows(), a.cols()))
    throw std::invalid_argument("truncated_svd: rank out of range");
  Eigen::BDCSVD<Matrix> dec(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (dec.info() != Eigen::Success) throw std::runtime_error("truncated_svd: factorization failed");
  return TruncatedSvd{dec.matrixU().leftCols(r), dec.singularValues().head(r), dec.matrixV().leftCols(r)};
}

Matrix pseudoinverse(const Matrix& a, double tol) {
  require_finite(a, "pseudoinverse");
  if (tol < 0) throw std::invalid_argument("pseudoinverse: tol must be nonnegative");
  Eigen::BDCSVD<Matrix> dec(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = dec.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return Matrix::Zero(a.cols(), a.rows());
  const double cutoff = tol * s(0);
  Index k = 0;
  while (k < s.size() && s(k) > cutoff) ++k;
  if (k == 0) return Matrix::Zero(a.cols(), a.rows());
  return dec.matrixV().leftCols(k) * s.head(k).cwiseInverse().asDiagonal() *
         dec.matrixU().leftCols(k).transpose();
}

EigResult symmetric_eig(const Matrix& h) {
  require_finite(h, "symmetric_eig");
  if (h.rows() != h.cols()) throw std::invalid_argument("symmetric_eig: matrix must be square");
  const double scale = h.norm();
  if ((h - h.transpose()).norm() > 1e-8 * std::max(scale, 1e-300))
    throw std::invalid_argument("symmetric_eig: matrix is not symmetric to tolerance");
  Eigen::SelfAdjointEigenSolver<Matrix> dec(0.5 * (h + h.transpose()));
  if (dec.info() != Eigen::Success) throw std::runtime_error("symmetric_eig: iteration failed");
  // Eigen sorts ascending; flip to nonincreasing.
  const Index n = h.rows();
  EigResult out;
  out.U = dec.eigenvectors().rowwise().reverse();
  out.eigenvalues = dec.eigenvalues().reverse();
  (void)n;
  return out;
}

LsqrResult lsqr(const LinearOperator& c, const Vector& d, double tol, int max_iter) {
  if (d.size() != c.rows()) throw std::invalid_argument("lsqr: rhs size mismatch");
  if (tol <= 0) throw std::invalid_argument("lsqr: tol must be positive");

  LsqrResult out;
  out.solution = Vector::Zero(c.cols());

  double beta = d.norm();
  if (beta == 0.0) {
    out.converged = true;
    return out;
  }
  Vector u = d / beta;
  Vector v = c.apply_transpose(u);
  double alpha = v.norm();
  if (alpha == 0.0) {
    out.converged = true;  // Cᵀd = 0, x = 0 is a least-squares solution
    return out;
  }
  v /= alpha;

  const double atb_norm = alpha * beta;
  Vector w = v;
  double phibar = beta;
  double rhobar = alpha;

  for (int it = 1; it <= max_iter; ++it) {
    u = c.apply(v) - alpha * u;
    beta = u.norm();
    if (beta > 0) u /= beta;
    v = c.apply_transpose(u) - beta * v;
    alpha = v.norm();
    if (alpha > 0) v /= alpha;

    const double rho = std::hypot(rhobar, beta);
    const double cs = rhobar / rho;
    const double sn = beta / rho;
    const double theta = sn * alpha;
    rhobar = -cs * alpha;
    const double phi = cs * phibar;
    phibar = sn * phibar;

    out.solution += (phi / rho) * w;
    w = v - (theta / rho) * w;
    out.iterations = it;

    const double normal_residual = phibar * alpha * std::abs(cs);
    if (normal_residual <= tol * atb_norm || alpha == 0.0 || beta == 0.0) {
      out.converged = true;
      break;
    }
  }
  return out;
}

Bidiagonalization golub_kahan(const LinearOperator& a, const Vector& b, Index k) {
  if (k < 1) throw std::invalid_argument("golub_kahan: k must be >= 1");
  if (b.size() != a.rows()) throw std::invalid_argument("golub_kahan: b size mismatch");
  const double beta1 = b.norm();
  if (beta1 == 0.0) throw std::invalid_argument("golub_kahan: b must be nonzero");

  const Index n = a.cols();
  const Index m = a.rows();
  k = std::min(k, std::min(n, m));

  Matrix q(n, k);
  Matrix w(m, k + 1);
  Vector alphas = Vector::Zero(k);
  Vector betas = Vector::Zero(k + 1);
  betas(0) = beta1;
  w.col(0) = b / beta1;

  bool breakdown = false;
  Index done = 0;
  double scale = beta1;

  Vector p = a.apply_transpose(w.col(0));
  double alpha = p.norm();
  if (alpha <= 1e-14 * scale) {
    // Aᵀb = 0: nothing to factor
    Bidiagonalization out{Matrix(n, 0), w.leftCols(1), Vector(0), betas.head(1), true};
    return out;
  }

  for (Index i = 0; i < k; ++i) {
    q.col(i) = p / alpha;
    alphas(i) = alpha;
    scale = std::max(scale, alpha);
    done = i + 1;

    Vector u = a.apply(q.col(i)) - alpha * w.col(i);
    reorthogonalize(u, w, i + 1);
    double beta = u.norm();
    if (beta <= 1e-13 * scale) {
      betas(i + 1) = 0.0;
      Vector fill = orthonormal_completion(w, i + 1);
      w.col(i + 1) = fill;  // zero when the basis is already complete
      breakdown = true;
      break;
    }
    betas(i + 1) = beta;
    scale = std::max(scale, beta);
    w.col(i + 1) = u / beta;

    if (i + 1 == k) break;

    p = a.apply_transpose(w.col(i + 1)) - beta * q.col(i);
    reorthogonalize(p, q, i + 1);
    alpha = p.norm();
    if (alpha <= 1e-13 * scale) {
      breakdown = true;
      break;
    }
  }

  Bidiagonalization out;
  out.Q = q.leftCols(done);
  out.W = w.leftCols(done + 1);
  out.alphas = alphas.head(done);
  out.betas = betas.head(done + 1);
  out.breakdown = breakdown;
  return out;
}

SpdFactorization::SpdFactorization(const Matrix& g) {
  if (g.rows() != g.cols()) throw std::invalid_argument("SpdFactorization: matrix must be square");
  require_finite(g, "SpdFactorization");
  llt_.compute(g);
  if (llt_.info() != Eigen::Success) {
    // locate the failing pivot for the error message
    const Index n = g.rows();
    Matrix l = Matrix::Zero(n, n);
    for (Index j = 0; j < n; ++j) {
      double d = g(j, j) - l.row(j).head(j).squaredNorm();
      if (d <= 0.0) {
        std::ostringstream msg;
        msg << "SpdFactorization: non-positive pivot at index " << j;
        throw std::runtime_error(msg.str());
      }
      l(j, j) = std::sqrt(d);
      for (Index i = j + 1; i < n; ++i)
        l(i, j) = (g(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
    }
    throw std::runtime_error("SpdFactorization: factorization failed");
  }
}

Vector SpdFactorization::solve(const Vector& rhs) const { return llt_.solve(rhs); }

Matrix SpdFactorization::solve(const Matrix& rhs) const { return llt_.solve(rhs); }

Matrix spd_solve(const Matrix& g, const Matrix& rhs) {
  if (g.rows() != rhs.rows()) throw std::invalid_argument("spd_solve: dimension mismatch");
  return SpdFactorization(g).solve(rhs);
}

Index numerical_rank(const Vector& singular_values, Index rows, Index cols) {
  if (singular_values.size() == 0) return 0;
  const double cutoff = static_cast<double>(std::max(rows, cols)) * kEps * singular_values(0);
  Index k = 0;
  while (k < singular_values.size() && singular_values(k) > cutoff) ++k;
  return k;
}

}  // namespace orim
