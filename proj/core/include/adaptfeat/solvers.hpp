#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "adaptfeat/feature_operator.hpp"
#include "adaptfeat/numerics.hpp"
#include "adaptfeat/spectral_forms.hpp"

namespace adaptfeat {

struct SolverConfig {
  /// Iteration cap (per continuation level for the bilinear solver).
  int max_iter = 5000;
  /// Constraint residual tolerance.
  double tol = 1e-8;
  /// Initial penalty parameter of the splitting solver; initial gradient
  /// step of the bilinear solver.
  double step = 1.0;
  /// Quadratic-penalty weights μ for the bilinear solver, increasing.
  std::vector<double> continuation = {1.0, 1e2, 1e4, 1e6, 1e8, 1e10, 1e12};

  /// {"max_iter": ..., "tol": ..., "step": ..., "continuation": [...]};
  /// missing keys keep their defaults.
  static SolverConfig from_json(std::string_view text);
  std::string to_json() const;
};

/// Raw (M¹, W, M²) factors found by the bilinear solver.
struct BilinearFactors {
  Matrix left;
  Matrix weights;
  Matrix right;
};

struct AdaptiveSolution {
  std::vector<Matrix> blocks;
  std::vector<BlockFactorization> factorizations;
  std::vector<BilinearFactors> bilinear;  // solve_bilinear only
  double objective = 0.0;
  double constraint_residual = 0.0;
  bool converged = true;
  int iterations = 0;
  std::string diagnostics;
  /// Augmented objective after every accepted step, and the index in
  /// `trace` where each continuation level starts (solve_bilinear only).
  std::vector<double> trace;
  std::vector<std::size_t> level_starts;

  /// Blocks column-stacked and concatenated.
  Vector coefficients() const;
};

/// Σ_ℓ Σ_j ω̃_{ω1⊕ω2}(σ_j(B_ℓ)) for stacked coefficients.
double effective_objective(const Vector& coefficients, const BlockStructure& structure,
                           double tol = kDefaultTol);

/// Ridgeless interpolation: B = Φ⁺(ŷ − f_{θ0}), objective ‖B‖².
AdaptiveSolution solve_min_norm(const FeatureOperator& op, double tol = 1e-8);

/// Minimizes Σ_ℓ Ω̃_{ω1⊕ω2}(B_ℓ) subject to Φ vec(B) = ŷ − f_{θ0} by
/// alternating a spectral proximal step with projection onto the affine
/// constraint set (scaled-dual splitting). The penalty parameter starts at
/// cfg.step and doubles while the consensus gap stalls.
AdaptiveSolution solve_effective(const FeatureOperator& op, const BlockStructure& structure,
                                 const SolverConfig& cfg = {});

/// Minimizes Ω(M) + ‖θ − θ0‖² + μ ‖ŷ − f_{θ0} − Φ M (θ − θ0)‖² over the
/// blockwise factors (M¹_ℓ, W_ℓ, M²_ℓ), with μ following cfg.continuation.
/// For fixed transforms the optimal W is a ridge solution, so each level runs
/// backtracking gradient descent on the transforms alone.
AdaptiveSolution solve_bilinear(const FeatureOperator& op, const BlockStructure& structure,
                                const SolverConfig& cfg = {});

struct OracleGrid {
  int points_per_axis = 9;
  int survivors = 3;
  double shrink = 0.5;
  /// Refinement stops when the pattern half-width drops below
  /// final_width * search radius.
  double final_width = 1e-8;
  Index max_dimension = 6;
};

/// Dense search over the affine solution set B = B_mn + N c (N a null-space
/// basis of Φ), evaluating the effective objective directly. Throws
/// DomainError when dim null(Φ) exceeds grid.max_dimension.
double brute_force_oracle(const FeatureOperator& op, const BlockStructure& structure,
                          const OracleGrid& grid = {});

}  // namespace adaptfeat
