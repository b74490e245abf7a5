#include "adaptfeat/spectral_forms.hpp"

#include <algorithm>
#include <cmath>

namespace adaptfeat {

BlockStructure::BlockStructure(std::vector<BlockSpec> blocks) : blocks_(std::move(blocks)) {
  for (const BlockSpec& b : blocks_) {
    if (b.rows <= 0 || b.cols <= 0) throw ShapeError("BlockStructure: empty block");
  }
}

Index BlockStructure::total_params() const {
  Index total = 0;
  for (const BlockSpec& b : blocks_) total += b.size();
  return total;
}

std::vector<ColumnRange> BlockStructure::column_ranges() const {
  std::vector<ColumnRange> ranges;
  Index cursor = 0;
  for (const BlockSpec& b : blocks_) {
    ranges.push_back({cursor, b.size()});
    cursor += b.size();
  }
  return ranges;
}

void BlockStructure::validate_network_form(Index output_dim) const {
  if (blocks_.empty()) throw ShapeError("BlockStructure: no blocks");
  const BlockSpec& last = blocks_.back();
  if (last.cols != output_dim) {
    throw ShapeError("BlockStructure: final block must have output_dim columns");
  }
  if (!last.right.is_characteristic()) {
    throw DomainError("BlockStructure: final block right transform must be frozen (char1)");
  }
}

BlockStructure BlockStructure::structureless(Index params, const ScalarPenalty& omega) {
  return BlockStructure({BlockSpec{params, 1, omega, ScalarPenalty::characteristic_at_one()}});
}

ScalarPenalty combined_penalty(const ScalarPenalty& left, const ScalarPenalty& right) {
  if (right.is_characteristic()) return left;
  if (left.is_characteristic()) return right;
  return ScalarPenalty::joint(left, right);
}

TripleSolution solve_triple(const ScalarPenalty& left, const ScalarPenalty& right, double d,
                            double tol) {
  if (!left.conforming() || !right.conforming()) {
    throw DomainError("solve_triple: penalties must be conforming");
  }
  if (d < 0.0 || std::isnan(d)) throw DomainError("solve_triple: requires d >= 0");
  if (d == 0.0) return {1.0, 1.0, 0.0, 0.0};

  // Outer problem over the product g = s1 s2: min_g (ω1 ⊕ ω2)(g) + d² / g².
  const EffectiveValue outer = effective_scalar_penalty(combined_penalty(left, right), d, tol);
  const double g = outer.z_star;
  // Inner split of g between the two factors.
  const JointSplit split = joint_penalty_split(left, right, g, tol);
  TripleSolution out;
  out.s1 = split.z;
  out.s2 = g / split.z;
  out.sigma = d / g;
  out.objective = left(out.s1) + right(out.s2) + out.sigma * out.sigma;
  return out;
}

Matrix StructurelessSolution::transform(Index params) const {
  Matrix m = Matrix::Identity(params, params);
  if (direction.size() == params) m += (s - 1.0) * direction * direction.transpose();
  return m;
}

double StructurelessSolution::objective(const ScalarPenalty& omega) const {
  return omega(s) + theta_delta.squaredNorm();
}

StructurelessSolution structureless_solution(const Vector& beta_hat, const ScalarPenalty& omega,
                                             double tol) {
  if (!beta_hat.allFinite()) throw DomainError("structureless_solution: non-finite β̂");
  StructurelessSolution out;
  const double norm = beta_hat.norm();
  if (norm == 0.0) {
    out.theta_delta = Vector::Zero(beta_hat.size());
    return out;
  }
  out.s = effective_scalar_penalty(omega, norm, tol).z_star;
  out.direction = beta_hat / norm;
  out.theta_delta = beta_hat / out.s;
  return out;
}

Matrix BlockFactorization::left_transform() const {
  return u * s1.asDiagonal() * u.transpose();
}

Matrix BlockFactorization::right_transform() const {
  return v * s2.asDiagonal() * v.transpose();
}

Matrix BlockFactorization::weights() const {
  Matrix sigma_mat = Matrix::Zero(rows(), cols());
  for (Index j = 0; j < sigma.size(); ++j) sigma_mat(j, j) = sigma(j);
  return u * sigma_mat * v.transpose();
}

Matrix BlockFactorization::coefficients() const {
  Matrix d_mat = Matrix::Zero(rows(), cols());
  for (Index j = 0; j < d.size(); ++j) d_mat(j, j) = d(j);
  return u * d_mat * v.transpose();
}

Matrix BlockFactorization::product() const {
  return left_transform() * weights() * right_transform();
}

double BlockFactorization::objective(const ScalarPenalty& left, const ScalarPenalty& right) const {
  return spectral_penalty(left, s1) + spectral_penalty(right, s2) + sigma.squaredNorm();
}

BlockFactorization factorize_block(const Matrix& b_hat, const ScalarPenalty& left,
                                   const ScalarPenalty& right, double tol) {
  if (!b_hat.allFinite()) throw DomainError("factorize_block: non-finite coefficients");
  const SvdFactors f = svd(b_hat);
  const Index k = std::min(b_hat.rows(), b_hat.cols());
  BlockFactorization out;
  out.u = f.u;
  out.v = f.v;
  out.d = f.s;
  out.s1 = Vector::Ones(b_hat.rows());
  out.s2 = Vector::Ones(b_hat.cols());
  out.sigma = Vector::Zero(k);
  for (Index j = 0; j < k; ++j) {
    const TripleSolution t = solve_triple(left, right, out.d(j), tol);
    out.s1(j) = t.s1;
    out.s2(j) = t.s2;
    out.sigma(j) = t.sigma;
  }
  return out;
}

KernelMatrix adapted_kernel_correction(std::span<const BlockFactorization> factorizations,
                                       const FeatureOperator& op) {
  op.validate();
  if (factorizations.size() != op.block_ranges.size()) {
    throw ShapeError("adapted_kernel_correction: one factorization per block required");
  }
  Matrix gram = op.phi * op.phi.transpose();
  for (std::size_t l = 0; l < factorizations.size(); ++l) {
    const BlockFactorization& f = factorizations[l];
    const ColumnRange range = op.block_ranges[l];
    const Index p = f.rows();
    const Index q = f.cols();
    if (p * q != range.size) {
      throw ShapeError("adapted_kernel_correction: factorization shape does not match block");
    }
    // Coordinates of each feature row in the rotated basis u_j v_k^T.
    Matrix coords(op.rows(), p * q);
    for (Index i = 0; i < op.rows(); ++i) {
      const Vector segment = op.phi.row(i).segment(range.begin, range.size).transpose();
      const Matrix h = f.u.transpose() * unvec(segment, p, q) * f.v;
      coords.row(i) = vec(h).transpose();
    }
    Vector weight(p * q);
    for (Index k = 0; k < q; ++k) {
      for (Index j = 0; j < p; ++j) {
        weight(k * p + j) = f.s1(j) * f.s1(j) * f.s2(k) * f.s2(k) - 1.0;
      }
    }
    gram.noalias() += coords * weight.asDiagonal() * coords.transpose();
  }
  return KernelMatrix(std::move(gram), op.output_dim);
}

std::vector<BlockTransform> squared_transforms(std::span<const BlockFactorization> factorizations,
                                               std::span<const ColumnRange> ranges) {
  if (factorizations.size() != ranges.size()) {
    throw ShapeError("squared_transforms: one factorization per range required");
  }
  std::vector<BlockTransform> out;
  for (std::size_t l = 0; l < factorizations.size(); ++l) {
    const BlockFactorization& f = factorizations[l];
    const Matrix m1 = f.left_transform();
    const Matrix m2 = f.right_transform();
    Matrix left = m1 * m1;
    Matrix right = m2 * m2;
    left = 0.5 * (left + left.transpose()).eval();
    right = 0.5 * (right + right.transpose()).eval();
    out.push_back(BlockTransform{ranges[l], f.rows(), f.cols(), std::move(left), std::move(right)});
  }
  return out;
}

}  // namespace adaptfeat
