#pragma once

#include <span>
#include <vector>

#include "adaptfeat/feature_operator.hpp"
#include "adaptfeat/kernel.hpp"
#include "adaptfeat/numerics.hpp"
#include "adaptfeat/penalty.hpp"

namespace adaptfeat {

/// One parameter block W ∈ R^{rows x cols} with the penalties on its left
/// (rows x rows) and right (cols x cols) feature transforms.
struct BlockSpec {
  Index rows = 0;
  Index cols = 0;
  ScalarPenalty left = ScalarPenalty::power_deviation(2.0);
  ScalarPenalty right = ScalarPenalty::characteristic_at_one();

  Index size() const { return rows * cols; }
};

class BlockStructure {
 public:
  BlockStructure() = default;
  explicit BlockStructure(std::vector<BlockSpec> blocks);

  const std::vector<BlockSpec>& blocks() const { return blocks_; }
  const BlockSpec& operator[](std::size_t i) const { return blocks_[i]; }
  std::size_t size() const { return blocks_.size(); }
  Index total_params() const;
  std::vector<ColumnRange> column_ranges() const;

  /// Checks the layered-network form: the final block has `output_dim`
  /// columns and a frozen right transform.
  void validate_network_form(Index output_dim) const;

  /// A single P x 1 block with ω on the left and a frozen right transform.
  static BlockStructure structureless(Index params, const ScalarPenalty& omega);

 private:
  std::vector<BlockSpec> blocks_;
};

/// ω1 ⊕ ω2 with the frozen-factor cases collapsed.
ScalarPenalty combined_penalty(const ScalarPenalty& left, const ScalarPenalty& right);

/// Minimizer of ω1(s1) + ω2(s2) + σ² subject to s1 σ s2 = d, s1, s2 >= 1.
struct TripleSolution {
  double s1 = 1.0;
  double s2 = 1.0;
  double sigma = 0.0;
  double objective = 0.0;
};

TripleSolution solve_triple(const ScalarPenalty& left, const ScalarPenalty& right, double d,
                            double tol = kDefaultTol);

/// Rank-one transform M̂ = I + (s − 1) u u^T with θ̂ − θ0 = β̂ / s.
struct StructurelessSolution {
  double s = 1.0;
  Vector direction;  // empty when β̂ = 0
  Vector theta_delta;

  Matrix transform(Index params) const;
  /// ω(s) + ‖θ̂ − θ0‖².
  double objective(const ScalarPenalty& omega) const;
};

StructurelessSolution structureless_solution(const Vector& beta_hat, const ScalarPenalty& omega,
                                             double tol = kDefaultTol);

/// B̂ = U diag(d) V^T together with M̂¹ = U diag(s1) U^T, Ŵ = U diag(σ) V^T and
/// M̂² = V diag(s2) V^T.
struct BlockFactorization {
  Matrix u;
  Matrix v;
  Vector s1;     // length rows
  Vector sigma;  // length min(rows, cols)
  Vector s2;     // length cols
  Vector d;      // length min(rows, cols)

  Index rows() const { return u.rows(); }
  Index cols() const { return v.rows(); }
  Matrix left_transform() const;
  Matrix right_transform() const;
  Matrix weights() const;
  Matrix coefficients() const;
  /// M̂¹ Ŵ M̂².
  Matrix product() const;
  /// Σ_j ω1(s1_j) + ω2(s2_j) + σ_j².
  double objective(const ScalarPenalty& left, const ScalarPenalty& right) const;
};

BlockFactorization factorize_block(const Matrix& b_hat, const ScalarPenalty& left,
                                   const ScalarPenalty& right, double tol = kDefaultTol);

/// K = K0 + Σ_ℓ Σ_{j,k} (s1_j² s2_k² − 1) c_jk c_jk^T with c_jk = Φ_ℓ vec(u_j v_k^T),
/// i.e. the Gram of Φ under M̂² with M̂ acting blockwise as W ↦ M̂¹ W M̂².
KernelMatrix adapted_kernel_correction(std::span<const BlockFactorization> factorizations,
                                       const FeatureOperator& op);

/// Per-block transforms (M̂¹)², (M̂²)² for kernel_from_features.
std::vector<BlockTransform> squared_transforms(std::span<const BlockFactorization> factorizations,
                                               std::span<const ColumnRange> ranges);

}  // namespace adaptfeat
