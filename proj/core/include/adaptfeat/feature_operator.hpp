#pragma once

#include <vector>

#include "adaptfeat/numerics.hpp"

namespace adaptfeat {

/// Half-open column interval [begin, begin + size).
struct ColumnRange {
  Index begin = 0;
  Index size = 0;

  Index end() const { return begin + size; }
  friend bool operator==(const ColumnRange&, const ColumnRange&) = default;
};

/// Stacked tangent features of N samples (N*C rows, sample-major) with the
/// linearization offsets f_{θ0}(x_i) and the interpolation targets ŷ_i.
struct FeatureOperator {
  Matrix phi;
  std::vector<ColumnRange> block_ranges;
  Vector offsets;
  Vector targets;
  Index output_dim = 1;

  Index rows() const { return phi.rows(); }
  Index params() const { return phi.cols(); }
  Index samples() const { return output_dim > 0 ? phi.rows() / output_dim : 0; }

  /// ŷ - f_{θ0}(x), the right-hand side of the interpolation constraint.
  Vector rhs() const { return targets - offsets; }

  /// Throws ShapeError unless the block ranges partition [0, P) in order and
  /// all row counts agree.
  void validate() const;

  /// max_i ‖ŷ_i − f_{θ0}(x_i) − Φ_i b‖ over samples.
  double constraint_residual(const Vector& coefficients) const;

  /// Single block spanning all columns.
  static FeatureOperator single_block(Matrix phi, Vector offsets, Vector targets,
                                      Index output_dim = 1);
};

}  // namespace adaptfeat
