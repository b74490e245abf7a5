#include "adaptfeat/mlp.hpp"

#include <cmath>
#include <string>

namespace adaptfeat {

namespace {

struct Activations {
  std::vector<Matrix> hidden;  // hidden[ℓ]: input to layer ℓ (N x widths[ℓ])
  std::vector<Matrix> masks;   // masks[ℓ]: ReLU'(pre) of layer ℓ, hidden layers only
  Matrix output;
};

void check_theta(const MlpSpec& spec, const ParamVector& theta) {
  spec.validate();
  if (theta.size() != spec.param_count()) {
    throw ShapeError("mlp: parameter vector has length " + std::to_string(theta.size()) +
                     ", expected " + std::to_string(spec.param_count()));
  }
}

Activations run_forward(const MlpSpec& spec, const std::vector<Matrix>& w, const Matrix& x) {
  if (x.cols() != spec.input_dim()) throw ShapeError("mlp: input dimension mismatch");
  Activations act;
  act.hidden.push_back(x);
  for (std::size_t l = 0; l < w.size(); ++l) {
    Matrix pre = act.hidden.back() * w[l];
    if (l + 1 == w.size()) {
      act.output = std::move(pre);
    } else {
      act.masks.push_back((pre.array() > 0.0).cast<double>().matrix());
      act.hidden.push_back(pre.cwiseMax(0.0));
    }
  }
  return act;
}

// Adds scale * (tangent features)^T of all rows into `acc` (P x N C).
void accumulate_features_transposed(const MlpSpec& spec, const std::vector<Matrix>& w,
                                    const Matrix& x, double scale, Matrix& acc) {
  const Activations act = run_forward(spec, w, x);
  const Index n = x.rows();
  const Index c = spec.output_dim();
  const std::vector<ColumnRange> ranges = spec.block_ranges();
  for (Index k = 0; k < c; ++k) {
    Matrix delta = Matrix::Zero(n, c);
    delta.col(k).setOnes();
    for (std::size_t l = w.size(); l-- > 0;) {
      const Matrix& h = act.hidden[l];
      const Index p = w[l].rows();
      const Index q = w[l].cols();
      for (Index i = 0; i < n; ++i) {
        auto column = acc.col(i * c + k);
        for (Index b = 0; b < q; ++b) {
          const double d = delta(i, b);
          if (d == 0.0) continue;
          column.segment(ranges[l].begin + b * p, p).noalias() += (scale * d) * h.row(i).transpose();
        }
      }
      if (l > 0) delta = (delta * w[l].transpose()).cwiseProduct(act.masks[l - 1]);
    }
  }
}

}  // namespace

void MlpSpec::validate() const {
  if (layer_widths.size() < 2) throw ShapeError("MlpSpec: at least input and output widths required");
  for (Index width : layer_widths) {
    if (width <= 0) throw ShapeError("MlpSpec: widths must be positive");
  }
}

Index MlpSpec::param_count() const {
  Index total = 0;
  for (std::size_t l = 0; l + 1 < layer_widths.size(); ++l) total += layer_widths[l] * layer_widths[l + 1];
  return total;
}

std::vector<ColumnRange> MlpSpec::block_ranges() const {
  std::vector<ColumnRange> out;
  Index cursor = 0;
  for (std::size_t l = 0; l + 1 < layer_widths.size(); ++l) {
    const Index size = layer_widths[l] * layer_widths[l + 1];
    out.push_back({cursor, size});
    cursor += size;
  }
  return out;
}

BlockStructure MlpSpec::block_structure(const ScalarPenalty& left, const ScalarPenalty& right) const {
  validate();
  std::vector<BlockSpec> blocks;
  for (std::size_t l = 0; l < layers(); ++l) {
    const bool last = l + 1 == layers();
    blocks.push_back(BlockSpec{layer_widths[l], layer_widths[l + 1], left,
                               last ? ScalarPenalty::characteristic_at_one() : right});
  }
  return BlockStructure(std::move(blocks));
}

ParamVector init_params(const MlpSpec& spec, CounterRng& rng) {
  spec.validate();
  std::vector<Matrix> w;
  for (std::size_t l = 0; l < spec.layers(); ++l) {
    const Index fan_in = spec.layer_widths[l];
    w.push_back(rng.normal_matrix(fan_in, spec.layer_widths[l + 1], 1.0 / std::sqrt(static_cast<double>(fan_in))));
  }
  return flatten_weights(spec, w);
}

std::vector<Matrix> layer_weights(const MlpSpec& spec, const ParamVector& theta) {
  check_theta(spec, theta);
  std::vector<Matrix> out;
  const std::vector<ColumnRange> ranges = spec.block_ranges();
  for (std::size_t l = 0; l < ranges.size(); ++l) {
    out.push_back(unvec(theta.segment(ranges[l].begin, ranges[l].size), spec.layer_widths[l],
                        spec.layer_widths[l + 1]));
  }
  return out;
}

ParamVector flatten_weights(const MlpSpec& spec, const std::vector<Matrix>& weights) {
  spec.validate();
  if (weights.size() != spec.layers()) throw ShapeError("flatten_weights: layer count mismatch");
  ParamVector theta(spec.param_count());
  const std::vector<ColumnRange> ranges = spec.block_ranges();
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].rows() != spec.layer_widths[l] || weights[l].cols() != spec.layer_widths[l + 1]) {
      throw ShapeError("flatten_weights: layer shape mismatch");
    }
    theta.segment(ranges[l].begin, ranges[l].size) = vec(weights[l]);
  }
  return theta;
}

ForwardResult forward_full(const MlpSpec& spec, const ParamVector& theta, const Vector& x) {
  const Activations act = run_forward(spec, layer_weights(spec, theta), x.transpose());
  return {act.output.row(0).transpose(), act.hidden.back().row(0).transpose()};
}

Vector forward(const MlpSpec& spec, const ParamVector& theta, const Vector& x) {
  return forward_full(spec, theta, x).output;
}

Matrix forward_batch(const MlpSpec& spec, const ParamVector& theta, const Matrix& x) {
  return run_forward(spec, layer_weights(spec, theta), x).output;
}

Matrix penultimate_batch(const MlpSpec& spec, const ParamVector& theta, const Matrix& x) {
  return run_forward(spec, layer_weights(spec, theta), x).hidden.back();
}

Matrix jacobian(const MlpSpec& spec, const ParamVector& theta, const Vector& x) {
  return jacobian_batch(spec, theta, x.transpose());
}

Matrix jacobian_batch(const MlpSpec& spec, const ParamVector& theta, const Matrix& x) {
  const std::vector<Matrix> w = layer_weights(spec, theta);
  Matrix acc = Matrix::Zero(spec.param_count(), x.rows() * spec.output_dim());
  accumulate_features_transposed(spec, w, x, 1.0, acc);
  return acc.transpose();
}

Matrix path_averaged_features(const MlpSpec& spec, const ParamVector& theta0,
                              const ParamVector& theta1, const Vector& x, int n_points) {
  return path_averaged_features_batch(spec, theta0, theta1, x.transpose(), n_points);
}

Matrix path_averaged_features_batch(const MlpSpec& spec, const ParamVector& theta0,
                                    const ParamVector& theta1, const Matrix& x, int n_points) {
  if (n_points < 2) throw DomainError("path_averaged_features: n_points must be >= 2");
  check_theta(spec, theta0);
  check_theta(spec, theta1);
  Matrix acc = Matrix::Zero(spec.param_count(), x.rows() * spec.output_dim());
  const double h = 1.0 / (n_points - 1);
  for (int i = 0; i < n_points; ++i) {
    const double t = i * h;
    const ParamVector theta = (1.0 - t) * theta0 + t * theta1;
    const double weight = (i == 0 || i == n_points - 1) ? 0.5 * h : h;
    accumulate_features_transposed(spec, layer_weights(spec, theta), x, weight, acc);
  }
  return acc.transpose();
}

LossGradient squared_loss_gradient(const MlpSpec& spec, const ParamVector& theta, const Matrix& x,
                                   const Matrix& targets) {
  const std::vector<Matrix> w = layer_weights(spec, theta);
  if (targets.rows() != x.rows() || targets.cols() != spec.output_dim()) {
    throw ShapeError("squared_loss_gradient: target shape mismatch");
  }
  const Activations act = run_forward(spec, w, x);
  const Matrix residual = act.output - targets;
  const double n = static_cast<double>(x.rows());
  LossGradient out;
  out.loss = residual.squaredNorm() / n;
  out.gradient.resize(theta.size());
  const std::vector<ColumnRange> ranges = spec.block_ranges();
  Matrix delta = (2.0 / n) * residual;
  for (std::size_t l = w.size(); l-- > 0;) {
    const Matrix g = act.hidden[l].transpose() * delta;
    out.gradient.segment(ranges[l].begin, ranges[l].size) = vec(g);
    if (l > 0) delta = (delta * w[l].transpose()).cwiseProduct(act.masks[l - 1]);
  }
  return out;
}

}  // namespace adaptfeat
