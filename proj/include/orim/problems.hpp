#pragma once

#include <vector>

#include "orim/model.hpp"

namespace orim {

struct HeatParams {
  Index n = 100;
  double kappa = 1.0;
};

/// k(t) = t^{-3/2} / (2 √π κ) · exp(-1/(4κ²t)), evaluated in log space so the
/// t → 0⁺ limit underflows to 0 without NaN.
double heat_kernel(double t, double kappa);

/// Lower-triangular Toeplitz discretization of the Volterra heat kernel on
/// [0,1] by the midpoint rule: A(i,j) = h k((i-j+1/2)h), h = 1/n.
Matrix heat_problem(const HeatParams& params);

/// Orthonormal DCT-II matrix of size n.
Matrix dct_matrix(Index n);

// Spatially invariant blur with a doubly symmetric PSF under reflexive
// boundary conditions; diagonal in the 2-D cosine transform basis.
struct DeblurProblem {
  Index rows = 0;
  Index cols = 0;
  Matrix psf;       // normalized to sum 1
  Matrix spectrum;  // rows x cols transform-domain eigenvalues
  Matrix C_row;     // DCT basis, rows x rows
  Matrix C_col;     // DCT basis, cols x cols

  Index pixels() const { return rows * cols; }
  Matrix transform(const Matrix& img) const { return C_row * img * C_col.transpose(); }
  Matrix inverse_transform(const Matrix& coeff) const { return C_row.transpose() * coeff * C_col; }

  /// vec (column-major) -> filter in the transform domain -> vec.
  Vector apply_filter(const Vector& x, const Matrix& filter) const;
  LinearOperator filter_operator(Matrix filter) const;
  LinearOperator op() const { return filter_operator(spectrum); }
  Matrix tikhonov_filter(double eta) const;
  LinearOperator tikhonov_operator(double eta) const { return filter_operator(tikhonov_filter(eta)); }
};

DeblurProblem deblur_problem(Index rows, Index cols, Index psf_size);

/// Direct spatial convolution with mirror (reflexive) padding; oracle for the
/// transform-domain operator.
Matrix reflexive_convolve(const Matrix& img, const Matrix& psf);

// Parallel-beam tomography: A stacks (integration x rotation) blocks per angle
// over a zero-padded grid.
struct TomoProblem {
  Index n_pix = 0;
  Index pad = 0;
  Index width = 0;  // n_pix + 2 pad
  std::vector<double> angles_deg;
  SparseMatrix A;  // (width * n_angles) x width²

  Index pixels() const { return width * width; }
  Index data_size() const { return static_cast<Index>(angles_deg.size()) * width; }
  /// Places an n_pix x n_pix image in the padded grid, vectorized column-major.
  Vector embed(const Matrix& image) const;
  LinearOperator op() const { return LinearOperator::from_sparse(A); }
};

TomoProblem tomo_problem(Index n_pix, std::vector<double> angles_deg);

/// Bilinear-interpolation rotation about the grid center, width² x width².
SparseMatrix rotation_matrix(Index width, double angle_deg);

/// Ten-ellipse head phantom (modified intensities), values clipped to [0,1].
Matrix shepp_logan(Index n_pix);

enum class NoiseConvention { squared_ratio, ratio };

struct NoisyData {
  Vector b;
  Vector delta;
};

/// Gaussian noise scaled so that ||δ||²/||b||² = level (squared_ratio) or
/// ||δ||/||b|| = level (ratio); deterministic per seed.
NoisyData add_noise(const Vector& b_clean, double level, NoiseConvention convention,
                    std::uint64_t seed);

/// Mean of the stack (one image excluded), with Γ = diag(μ) and
/// S = diag(μ) + μμᵀ.
PriorModel prior_from_stack(const std::vector<Matrix>& images, Index exclude);

struct MVariants {
  PriorModel m1;  // S = I + μμᵀ
  PriorModel m2;  // S = Γ
  PriorModel m3;  // S = Γ + μμᵀ
};

MVariants build_M_variants(const PriorModel& prior);

}  // namespace orim
