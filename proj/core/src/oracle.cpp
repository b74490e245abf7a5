#include <algorithm>
#include <cmath>
#include <vector>

#include "adaptfeat/solvers.hpp"

namespace adaptfeat {

namespace {

// Upper bound on any singular value attainable with effective objective <= budget.
double singular_value_bound(const ScalarPenalty& joint, double budget) {
  double v = std::sqrt(std::max(budget, 1e-300));
  for (int i = 0; i < 200 && effective_scalar_penalty(joint, v).value < budget; ++i) v *= 2.0;
  return v;
}

}  // namespace

double brute_force_oracle(const FeatureOperator& op, const BlockStructure& structure,
                          const OracleGrid& grid) {
  op.validate();
  if (structure.column_ranges() != op.block_ranges) {
    throw ShapeError("brute_force_oracle: block structure does not match the operator");
  }
  if (grid.points_per_axis < 2 || grid.survivors < 1 || !(grid.shrink > 0.0 && grid.shrink < 1.0) ||
      !(grid.final_width > 0.0)) {
    throw DomainError("brute_force_oracle: invalid grid settings");
  }
  const Vector rhs = op.rhs();
  const Vector b_mn = min_norm_solve(op.phi, rhs);
  const Matrix basis = null_space_basis(op.phi);
  const Index k = basis.cols();
  const auto objective = [&](const Vector& c) {
    return effective_objective(k == 0 ? b_mn : Vector(b_mn + basis * c), structure);
  };
  const double f0 = objective(Vector::Zero(k));
  if (k == 0) return f0;
  if (k > grid.max_dimension) {
    throw DomainError("brute_force_oracle: null-space dimension exceeds the grid limit");
  }

  double radius2 = 0.0;
  for (const BlockSpec& spec : structure.blocks()) {
    const double tau = singular_value_bound(combined_penalty(spec.left, spec.right), f0);
    radius2 += static_cast<double>(std::min(spec.rows, spec.cols)) * tau * tau;
  }
  const double radius = std::sqrt(radius2);

  // Coarse tensor grid over [-R, R]^k.
  const int n = grid.points_per_axis;
  const double spacing = 2.0 * radius / (n - 1);
  std::vector<std::pair<double, Vector>> ranked;
  std::vector<int> digits(static_cast<std::size_t>(k), 0);
  Vector c(k);
  while (true) {
    for (Index a = 0; a < k; ++a) c(a) = -radius + spacing * digits[static_cast<std::size_t>(a)];
    ranked.emplace_back(objective(c), c);
    Index a = 0;
    while (a < k && ++digits[static_cast<std::size_t>(a)] == n) digits[static_cast<std::size_t>(a++)] = 0;
    if (a == k) break;
  }
  const auto by_value = [](const auto& x, const auto& y) { return x.first < y.first; };
  const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(grid.survivors), ranked.size());
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(keep), ranked.end(), by_value);

  double best = f0;
  const Index stencil = static_cast<Index>(std::pow(3.0, static_cast<double>(k)));
  for (std::size_t s = 0; s < keep; ++s) {
    Vector center = ranked[s].second;
    double value = ranked[s].first;
    double width = spacing;
    for (int step = 0; step < 20000 && width >= grid.final_width * radius; ++step) {
      Vector best_point = center;
      double best_value = value;
      for (Index code = 0; code < stencil; ++code) {
        Index rest = code;
        bool is_center = true;
        Vector trial = center;
        for (Index a = 0; a < k; ++a) {
          const int offset = static_cast<int>(rest % 3) - 1;
          rest /= 3;
          if (offset != 0) {
            is_center = false;
            trial(a) += offset * width;
          }
        }
        if (is_center) continue;
        const double f = objective(trial);
        if (f < best_value) {
          best_value = f;
          best_point = trial;
        }
      }
      if (best_value < value) {
        center = best_point;
        value = best_value;
      } else {
        width *= grid.shrink;
      }
    }
    best = std::min(best, value);
  }
  return best;
}

}  // namespace adaptfeat
