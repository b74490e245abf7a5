#pragma once

#include <vector>

#include "adaptfeat/feature_operator.hpp"
#include "adaptfeat/numerics.hpp"
#include "adaptfeat/rng.hpp"
#include "adaptfeat/spectral_forms.hpp"

namespace adaptfeat {

/// Bias-free MLP with ReLU hidden layers and a linear output layer.
/// Layer ℓ holds W_ℓ ∈ R^{widths[ℓ] x widths[ℓ+1]} and computes W_ℓ^T h.
struct MlpSpec {
  std::vector<Index> layer_widths;

  void validate() const;
  std::size_t layers() const { return layer_widths.size() - 1; }
  Index input_dim() const { return layer_widths.front(); }
  Index output_dim() const { return layer_widths.back(); }
  Index param_count() const;
  /// Column ranges of each layer's weights inside the flat parameter vector.
  std::vector<ColumnRange> block_ranges() const;
  /// One block per layer; hidden layers get `left` and `right`, the output
  /// layer gets `left` and a frozen right transform.
  BlockStructure block_structure(const ScalarPenalty& left, const ScalarPenalty& right) const;
};

/// Flat parameters: layers concatenated in order, each column-stacked.
using ParamVector = Vector;

/// Entries drawn from N(0, 1 / fan_in) layer by layer.
ParamVector init_params(const MlpSpec& spec, CounterRng& rng);

/// Copies of each layer's weight matrix.
std::vector<Matrix> layer_weights(const MlpSpec& spec, const ParamVector& theta);
ParamVector flatten_weights(const MlpSpec& spec, const std::vector<Matrix>& weights);

struct ForwardResult {
  Vector output;
  /// Input to the final linear layer.
  Vector penultimate;
};

ForwardResult forward_full(const MlpSpec& spec, const ParamVector& theta, const Vector& x);
Vector forward(const MlpSpec& spec, const ParamVector& theta, const Vector& x);

/// Row-wise forward pass over a data matrix (N x D) → N x C.
Matrix forward_batch(const MlpSpec& spec, const ParamVector& theta, const Matrix& x);
/// Penultimate activations for every row (N x widths[L-1]).
Matrix penultimate_batch(const MlpSpec& spec, const ParamVector& theta, const Matrix& x);

/// ∂f_k / ∂θ as a C x P matrix (ReLU'(0) = 0).
Matrix jacobian(const MlpSpec& spec, const ParamVector& theta, const Vector& x);

/// Tangent features of every row stacked sample-major: (N C) x P.
Matrix jacobian_batch(const MlpSpec& spec, const ParamVector& theta, const Matrix& x);

inline constexpr int kDefaultPathPoints = 50;

/// Trapezoidal average of the Jacobian over θ(t) = (1 − t) θ0 + t θ1 at
/// t = 0, 1/(n−1), …, 1.
Matrix path_averaged_features(const MlpSpec& spec, const ParamVector& theta0,
                              const ParamVector& theta1, const Vector& x,
                              int n_points = kDefaultPathPoints);

/// Batched version: (N C) x P, sample-major.
Matrix path_averaged_features_batch(const MlpSpec& spec, const ParamVector& theta0,
                                    const ParamVector& theta1, const Matrix& x,
                                    int n_points = kDefaultPathPoints);

/// Mean squared error (1/N) Σ_i ‖f(x_i) − y_i‖² and its gradient.
struct LossGradient {
  double loss = 0.0;
  ParamVector gradient;
};
LossGradient squared_loss_gradient(const MlpSpec& spec, const ParamVector& theta, const Matrix& x,
                                   const Matrix& targets);

}  // namespace adaptfeat
