#pragma once

#include <span>
#include <vector>

#include "adaptfeat/feature_operator.hpp"
#include "adaptfeat/numerics.hpp"

namespace adaptfeat {

/// Symmetric PSD Gram matrix over N samples with C x C blocks stored in a
/// single NC x NC matrix, sample-major (row i*C + k is output k of sample i).
class KernelMatrix {
 public:
  KernelMatrix() = default;
  /// Symmetrizes `gram` after checking its relative asymmetry is <= 1e-8.
  explicit KernelMatrix(Matrix gram, Index output_dim = 1);

  const Matrix& gram() const { return gram_; }
  Index output_dim() const { return output_dim_; }
  Index samples() const { return output_dim_ > 0 ? gram_.rows() / output_dim_ : 0; }

  /// K(x_i, x_j) as a C x C block.
  Matrix block(Index i, Index j) const;
  /// trace K(x_i, x_i) for every sample.
  Vector diagonal_mass() const;

  double min_eigenvalue() const;
  /// min eigenvalue >= -rel_tol * max(trace, 1).
  bool is_psd(double rel_tol = 1e-8) const;

  /// Samples reordered so that new sample i is old sample order[i].
  KernelMatrix permuted(std::span<const Index> order) const;

 private:
  Matrix gram_;
  Index output_dim_ = 1;
};

/// Per-block feature transform used by the adapted kernel: a feature row
/// restricted to `range`, reshaped as G (rows x cols), maps to left · G · right.
/// For M̂ acting as W ↦ M¹ W M², pass left = (M¹)² and right = (M²)².
struct BlockTransform {
  ColumnRange range;
  Index rows = 0;
  Index cols = 0;
  Matrix left;
  Matrix right;
};

/// Gram of stacked features (NC x P). With no transforms this is K0; blocks
/// without a transform are left untouched (identity). Transforms must be
/// symmetric PSD, otherwise DomainError.
KernelMatrix kernel_from_features(const Matrix& features,
                                  std::span<const BlockTransform> transforms = {},
                                  Index output_dim = 1);

/// Cross Gram ∇f(x_a) M̂² ∇f(x_b)^T between two stacked feature sets.
Matrix cross_kernel(const Matrix& features_a, const Matrix& features_b,
                    std::span<const BlockTransform> transforms = {});

/// (f_θ̂(x) − f_θ0(x))(f_θ̂(x') − f_θ0(x'))^T for prediction deltas (N x C).
KernelMatrix label_kernel(const Matrix& prediction_deltas);

/// Frobenius cosine similarity. Throws DomainError if either kernel is zero.
double kernel_alignment(const KernelMatrix& a, const KernelMatrix& b);

}  // namespace adaptfeat
