#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "adaptfeat/kernel.hpp"
#include "adaptfeat/mlp.hpp"

namespace adaptfeat {

struct TrainConfig {
  double lr0 = 0.1;
  double momentum = 0.9;
  int epochs = 2000;
  int batch_size = 50;
  std::uint64_t seed = 0;
  bool cosine = true;

  void validate() const;
  /// Missing keys keep their defaults.
  static TrainConfig from_json(std::string_view text);
  std::string to_json() const;
};

/// lr0 (1 + cos(π t / T)) / 2.
double cosine_learning_rate(double lr0, double t, double total);

struct TrainResult {
  ParamVector theta;
  /// Mean squared error over each epoch's minibatches.
  std::vector<double> loss_history;
};

class TrainingDiverged : public Error {
 public:
  TrainingDiverged(const std::string& what, std::vector<double> history)
      : Error(what), history_(std::move(history)) {}
  const std::vector<double>& history() const { return history_; }

 private:
  std::vector<double> history_;
};

inline constexpr double kDivergenceThreshold = 1e6;

/// Minibatch SGD with momentum (v ← m v + g, θ ← θ − lr v) on the squared
/// error. Minibatch order is shuffled from cfg.seed.
TrainResult train_from(const MlpSpec& spec, ParamVector theta0, const Matrix& data,
                       const Matrix& targets, const TrainConfig& cfg);

/// Initializes from cfg.seed (stream 2) then calls train_from.
TrainResult train(const MlpSpec& spec, const Matrix& data, const Matrix& targets,
                  const TrainConfig& cfg);
TrainResult train(const MlpSpec& spec, const Matrix& data, const Vector& targets,
                  const TrainConfig& cfg);

ParamVector training_init(const MlpSpec& spec, std::uint64_t seed);

struct TargetSet {
  Vector easy;
  Vector hard;
  std::uint64_t builder_seed = 0;
};

/// Least-squares fit of the labels on the penultimate features of a fresh
/// network (seed stream 1); hard = sign(easy) with sign(0) = +1.
TargetSet build_targets(const Matrix& data, const Vector& binary_labels, const MlpSpec& spec,
                        std::uint64_t seed);

double sign_of(double v);

struct AlignmentResult {
  /// Sample order used by every emitted matrix (increasing easy target).
  std::vector<Index> order;
  Vector y;         // easy targets, sorted
  Vector hard;      // sign(y), sorted
  Vector residual;  // sign(y) − α y with α the least-squares scale
  KernelMatrix k0;
  KernelMatrix k_easy;
  KernelMatrix k_hard;
  KernelMatrix ky_easy;
  KernelMatrix ky_hard;
  std::map<std::string, double> alignments;
  std::vector<double> loss_easy;
  std::vector<double> loss_hard;
  ParamVector theta0;
  ParamVector theta_easy;
  ParamVector theta_hard;
};

/// Trains the easy and hard arms from the same initialization and compares
/// path-averaged kernels with their label kernels. Targets are built with
/// `target_seed`.
AlignmentResult run_alignment_experiment(const Matrix& data, const Vector& binary_labels,
                                         const MlpSpec& spec, const TrainConfig& cfg,
                                         int n_path_points = kDefaultPathPoints,
                                         std::uint64_t target_seed = 0);

}  // namespace adaptfeat
