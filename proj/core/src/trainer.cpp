#include "adaptfeat/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <numbers>

#include <json.hpp>

namespace adaptfeat {

void TrainConfig::validate() const {
  if (!(lr0 > 0.0)) throw DomainError("TrainConfig: lr0 must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw DomainError("TrainConfig: momentum must be in [0, 1)");
  if (epochs <= 0 || batch_size <= 0) throw DomainError("TrainConfig: epochs and batch_size must be positive");
}

TrainConfig TrainConfig::from_json(std::string_view text) {
  TrainConfig cfg;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("train config: ") + e.what());
  }
  if (!j.is_object()) throw Error("train config: expected a JSON object");
  if (j.contains("lr0")) cfg.lr0 = j.at("lr0").get<double>();
  if (j.contains("momentum")) cfg.momentum = j.at("momentum").get<double>();
  if (j.contains("epochs")) cfg.epochs = j.at("epochs").get<int>();
  if (j.contains("batch_size")) cfg.batch_size = j.at("batch_size").get<int>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("cosine")) cfg.cosine = j.at("cosine").get<bool>();
  cfg.validate();
  return cfg;
}

std::string TrainConfig::to_json() const {
  nlohmann::json j;
  j["lr0"] = lr0;
  j["momentum"] = momentum;
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  j["seed"] = seed;
  j["cosine"] = cosine;
  return j.dump();
}

double cosine_learning_rate(double lr0, double t, double total) {
  if (!(total > 0.0)) throw DomainError("cosine_learning_rate: total must be positive");
  return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * t / total));
}

ParamVector training_init(const MlpSpec& spec, std::uint64_t seed) {
  CounterRng rng(seed, 2);
  return init_params(spec, rng);
}

TrainResult train_from(const MlpSpec& spec, ParamVector theta, const Matrix& data,
                       const Matrix& targets, const TrainConfig& cfg) {
  cfg.validate();
  spec.validate();
  if (theta.size() != spec.param_count()) throw ShapeError("train: parameter length mismatch");
  if (data.cols() != spec.input_dim() || targets.rows() != data.rows() ||
      targets.cols() != spec.output_dim()) {
    throw ShapeError("train: data/target shape mismatch");
  }
  if (!data.allFinite() || !targets.allFinite()) throw DomainError("train: non-finite data or targets");

  const Index n = data.rows();
  CounterRng shuffler(cfg.seed, 3);
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  ParamVector velocity = ParamVector::Zero(theta.size());
  TrainResult result;
  Matrix batch_x;
  Matrix batch_y;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.cosine ? cosine_learning_rate(cfg.lr0, epoch, cfg.epochs) : cfg.lr0;
    shuffler.shuffle(order);
    double loss_sum = 0.0;
    for (Index start = 0; start < n; start += cfg.batch_size) {
      const Index size = std::min<Index>(cfg.batch_size, n - start);
      batch_x.resize(size, data.cols());
      batch_y.resize(size, targets.cols());
      for (Index i = 0; i < size; ++i) {
        batch_x.row(i) = data.row(order[static_cast<std::size_t>(start + i)]);
        batch_y.row(i) = targets.row(order[static_cast<std::size_t>(start + i)]);
      }
      const LossGradient lg = squared_loss_gradient(spec, theta, batch_x, batch_y);
      loss_sum += lg.loss * static_cast<double>(size);
      velocity = cfg.momentum * velocity + lg.gradient;
      theta -= lr * velocity;
    }
    const double epoch_loss = loss_sum / static_cast<double>(n);
    result.loss_history.push_back(epoch_loss);
    if (!std::isfinite(epoch_loss) || epoch_loss > kDivergenceThreshold || !theta.allFinite()) {
      throw TrainingDiverged("train: loss diverged at epoch " + std::to_string(epoch), result.loss_history);
    }
  }
  result.theta = std::move(theta);
  return result;
}

TrainResult train(const MlpSpec& spec, const Matrix& data, const Matrix& targets,
                  const TrainConfig& cfg) {
  return train_from(spec, training_init(spec, cfg.seed), data, targets, cfg);
}

TrainResult train(const MlpSpec& spec, const Matrix& data, const Vector& targets,
                  const TrainConfig& cfg) {
  return train(spec, data, Matrix(targets), cfg);
}

double sign_of(double v) { return v < 0.0 ? -1.0 : 1.0; }

TargetSet build_targets(const Matrix& data, const Vector& binary_labels, const MlpSpec& spec,
                        std::uint64_t seed) {
  spec.validate();
  if (data.rows() < 2) throw DomainError("build_targets: at least two samples required");
  if (binary_labels.size() != data.rows()) throw ShapeError("build_targets: label count mismatch");
  if (spec.output_dim() != 1) throw ShapeError("build_targets: scalar-output network required");
  const bool has_neg = (binary_labels.array() < 0.0).any();
  const bool has_pos = (binary_labels.array() > 0.0).any();
  if (!has_neg || !has_pos) throw DomainError("build_targets: both classes must be present");

  CounterRng rng(seed, 1);
  const ParamVector theta = init_params(spec, rng);
  const Matrix z = penultimate_batch(spec, theta, data);
  if (z.norm() == 0.0) throw DomainError("build_targets: penultimate features are all zero");
  const Vector coef = pseudoinverse(z) * binary_labels;
  TargetSet out;
  out.builder_seed = seed;
  out.easy = z * coef;
  out.hard = out.easy.unaryExpr([](double v) { return sign_of(v); });
  return out;
}

AlignmentResult run_alignment_experiment(const Matrix& data, const Vector& binary_labels,
                                         const MlpSpec& spec, const TrainConfig& cfg,
                                         int n_path_points, std::uint64_t target_seed) {
  const TargetSet targets = build_targets(data, binary_labels, spec, target_seed);
  const Index n = data.rows();

  AlignmentResult out;
  out.order.resize(static_cast<std::size_t>(n));
  std::iota(out.order.begin(), out.order.end(), Index{0});
  std::stable_sort(out.order.begin(), out.order.end(),
                   [&](Index a, Index b) { return targets.easy(a) < targets.easy(b); });
  Matrix x(n, data.cols());
  out.y.resize(n);
  out.hard.resize(n);
  for (Index i = 0; i < n; ++i) {
    const Index src = out.order[static_cast<std::size_t>(i)];
    x.row(i) = data.row(src);
    out.y(i) = targets.easy(src);
    out.hard(i) = targets.hard(src);
  }
  const double alpha = out.y.squaredNorm() > 0.0 ? out.hard.dot(out.y) / out.y.squaredNorm() : 0.0;
  out.residual = out.hard - alpha * out.y;

  out.theta0 = training_init(spec, cfg.seed);
  const TrainResult easy = train_from(spec, out.theta0, x, Matrix(out.y), cfg);
  const TrainResult hard = train_from(spec, out.theta0, x, Matrix(out.hard), cfg);
  out.theta_easy = easy.theta;
  out.theta_hard = hard.theta;
  out.loss_easy = easy.loss_history;
  out.loss_hard = hard.loss_history;

  const Index c = spec.output_dim();
  out.k0 = kernel_from_features(jacobian_batch(spec, out.theta0, x), {}, c);
  out.k_easy = kernel_from_features(
      path_averaged_features_batch(spec, out.theta0, out.theta_easy, x, n_path_points), {}, c);
  out.k_hard = kernel_from_features(
      path_averaged_features_batch(spec, out.theta0, out.theta_hard, x, n_path_points), {}, c);
  const Matrix f0 = forward_batch(spec, out.theta0, x);
  out.ky_easy = label_kernel(forward_batch(spec, out.theta_easy, x) - f0);
  out.ky_hard = label_kernel(forward_batch(spec, out.theta_hard, x) - f0);

  out.alignments["easy_label"] = kernel_alignment(out.k_easy, out.ky_easy);
  out.alignments["hard_label"] = kernel_alignment(out.k_hard, out.ky_hard);
  out.alignments["easy_init"] = kernel_alignment(out.k_easy, out.k0);
  out.alignments["hard_init"] = kernel_alignment(out.k_hard, out.k0);
  return out;
}

}  // namespace adaptfeat
