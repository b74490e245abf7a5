#include "adaptfeat/feature_operator.hpp"

#include <algorithm>

namespace adaptfeat {

void FeatureOperator::validate() const {
  if (output_dim <= 0) throw ShapeError("FeatureOperator: output_dim must be positive");
  if (phi.rows() % output_dim != 0) {
    throw ShapeError("FeatureOperator: row count is not a multiple of output_dim");
  }
  if (offsets.size() != phi.rows() || targets.size() != phi.rows()) {
    throw ShapeError("FeatureOperator: offsets/targets length must equal phi rows");
  }
  Index cursor = 0;
  for (const ColumnRange& r : block_ranges) {
    if (r.begin != cursor || r.size <= 0) {
      throw ShapeError("FeatureOperator: block ranges must partition the columns in order");
    }
    cursor = r.end();
  }
  if (cursor != phi.cols()) {
    throw ShapeError("FeatureOperator: block ranges do not cover all columns");
  }
}

double FeatureOperator::constraint_residual(const Vector& coefficients) const {
  if (coefficients.size() != phi.cols()) {
    throw ShapeError("constraint_residual: coefficient length mismatch");
  }
  const Vector r = rhs() - phi * coefficients;
  double worst = 0.0;
  for (Index i = 0; i < samples(); ++i) {
    worst = std::max(worst, r.segment(i * output_dim, output_dim).norm());
  }
  return worst;
}

FeatureOperator FeatureOperator::single_block(Matrix phi, Vector offsets, Vector targets,
                                              Index output_dim) {
  FeatureOperator op;
  op.block_ranges = {ColumnRange{0, phi.cols()}};
  op.phi = std::move(phi);
  op.offsets = std::move(offsets);
  op.targets = std::move(targets);
  op.output_dim = output_dim;
  op.validate();
  return op;
}

}  // namespace adaptfeat
