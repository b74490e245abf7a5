#include "adaptfeat/kernel.hpp"

#include <algorithm>
#include <cmath>

namespace adaptfeat {

namespace {

void require_psd(const Matrix& m, const char* name) {
  if (m.rows() != m.cols()) throw ShapeError(std::string(name) + " transform must be square");
  const double scale = std::max(1.0, m.norm());
  if ((m - m.transpose()).norm() > 1e-10 * scale) {
    throw DomainError(std::string(name) + " transform is not symmetric");
  }
  if (m.rows() == 0) return;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-10 * scale) {
    throw DomainError(std::string(name) + " transform is not positive semidefinite");
  }
}

Matrix apply_transforms(const Matrix& features, std::span<const BlockTransform> transforms) {
  if (transforms.empty()) return features;
  Matrix out = features;
  for (const BlockTransform& t : transforms) {
    if (t.range.end() > features.cols() || t.rows * t.cols != t.range.size) {
      throw ShapeError("BlockTransform: range does not match feature columns");
    }
    if (t.left.rows() != t.rows || t.right.rows() != t.cols) {
      throw ShapeError("BlockTransform: factor shapes do not match block shape");
    }
    require_psd(t.left, "left");
    require_psd(t.right, "right");
    for (Index i = 0; i < features.rows(); ++i) {
      const Vector segment = features.row(i).segment(t.range.begin, t.range.size).transpose();
      const Matrix g = unvec(segment, t.rows, t.cols);
      const Matrix mapped = t.left * g * t.right;
      out.row(i).segment(t.range.begin, t.range.size) = vec(mapped).transpose();
    }
  }
  return out;
}

}  // namespace

KernelMatrix::KernelMatrix(Matrix gram, Index output_dim) : output_dim_(output_dim) {
  if (gram.rows() != gram.cols()) throw ShapeError("KernelMatrix: gram must be square");
  if (output_dim <= 0 || gram.rows() % output_dim != 0) {
    throw ShapeError("KernelMatrix: size is not a multiple of output_dim");
  }
  const double asym = (gram - gram.transpose()).norm();
  if (asym > 1e-8 * std::max(1.0, gram.norm())) {
    throw DomainError("KernelMatrix: gram is not symmetric");
  }
  gram_ = 0.5 * (gram + gram.transpose());
}

Matrix KernelMatrix::block(Index i, Index j) const {
  return gram_.block(i * output_dim_, j * output_dim_, output_dim_, output_dim_);
}

Vector KernelMatrix::diagonal_mass() const {
  Vector out(samples());
  for (Index i = 0; i < samples(); ++i) out(i) = block(i, i).trace();
  return out;
}

double KernelMatrix::min_eigenvalue() const {
  if (gram_.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram_, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

bool KernelMatrix::is_psd(double rel_tol) const {
  return min_eigenvalue() >= -rel_tol * std::max(1.0, gram_.trace());
}

KernelMatrix KernelMatrix::permuted(std::span<const Index> order) const {
  if (static_cast<Index>(order.size()) != samples()) {
    throw ShapeError("KernelMatrix::permuted: order length mismatch");
  }
  const Index c = output_dim_;
  Matrix out(gram_.rows(), gram_.cols());
  for (Index a = 0; a < samples(); ++a) {
    for (Index b = 0; b < samples(); ++b) {
      out.block(a * c, b * c, c, c) = gram_.block(order[a] * c, order[b] * c, c, c);
    }
  }
  return KernelMatrix(std::move(out), c);
}

KernelMatrix kernel_from_features(const Matrix& features,
                                  std::span<const BlockTransform> transforms,
                                  Index output_dim) {
  const Matrix mapped = apply_transforms(features, transforms);
  Matrix gram = features * mapped.transpose();
  return KernelMatrix(std::move(gram), output_dim);
}

Matrix cross_kernel(const Matrix& features_a, const Matrix& features_b,
                    std::span<const BlockTransform> transforms) {
  if (features_a.cols() != features_b.cols()) {
    throw ShapeError("cross_kernel: feature dimension mismatch");
  }
  return features_a * apply_transforms(features_b, transforms).transpose();
}

KernelMatrix label_kernel(const Matrix& prediction_deltas) {
  const Index n = prediction_deltas.rows();
  const Index c = prediction_deltas.cols();
  Vector stacked(n * c);
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < c; ++k) stacked(i * c + k) = prediction_deltas(i, k);
  }
  return KernelMatrix(stacked * stacked.transpose(), std::max<Index>(c, 1));
}

double kernel_alignment(const KernelMatrix& a, const KernelMatrix& b) {
  if (a.gram().rows() != b.gram().rows()) throw ShapeError("kernel_alignment: shape mismatch");
  const double na = a.gram().norm();
  const double nb = b.gram().norm();
  if (na == 0.0 || nb == 0.0) {
    throw DomainError("kernel_alignment: undefined for a zero-norm kernel");
  }
  return frobenius_inner(a.gram(), b.gram()) / (na * nb);
}

}  // namespace adaptfeat
