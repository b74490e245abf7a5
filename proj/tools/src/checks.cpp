#include "checks.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>

#include <json.hpp>

#include "adaptfeat/mlp.hpp"
#include "adaptfeat/penalty.hpp"
#include "adaptfeat/rng.hpp"
#include "adaptfeat/solvers.hpp"
#include "adaptfeat/spectral_forms.hpp"

namespace adaptfeat::tools {

namespace {

// Largest observed value must stay at or below the threshold.
CheckResult at_most(std::string name, double value, double threshold) {
  return {std::move(name), value, threshold, value <= threshold};
}

CheckResult at_least(std::string name, double value, double threshold) {
  return {std::move(name), value, threshold, value >= threshold};
}

ScalarPenalty random_power(CounterRng& rng) {
  static constexpr double kExponents[] = {1.0, 1.5, 2.0, 3.0, 4.0};
  return ScalarPenalty::power_deviation(kExponents[rng.below(5)]);
}

std::vector<CheckResult> structureless_suite(int trials, std::uint64_t seed) {
  const ScalarPenalty omega = ScalarPenalty::power_deviation(2.0);
  double gap = 0.0;
  double product = 0.0;
  double residual = 0.0;
  for (int t = 0; t < trials; ++t) {
    CounterRng rng(seed, 100 + static_cast<std::uint64_t>(t));
    const Matrix phi = rng.normal_matrix(8, 30);
    const Vector y = rng.normal_vector(8);
    const FeatureOperator op = FeatureOperator::single_block(phi, Vector::Zero(8), y);
    const Vector beta = min_norm_solve(phi, y);
    const StructurelessSolution closed = structureless_solution(beta, omega);
    const AdaptiveSolution sol = solve_bilinear(op, BlockStructure::structureless(30, omega));
    const double ref = closed.objective(omega);
    gap = std::max(gap, std::abs(sol.objective - ref) / std::max(ref, 1e-300));
    product = std::max(product, (sol.coefficients() - beta).norm());
    residual = std::max(residual, sol.constraint_residual);
  }
  return {at_most("objective_relative_gap", gap, 1e-3), at_most("transformed_weights_vs_min_norm", product, 1e-6),
          at_most("constraint_residual", residual, 1e-8)};
}

std::vector<CheckResult> blockwise_suite(int trials, std::uint64_t seed) {
  double gap = 0.0;
  double recon = 0.0;
  double per_value = 0.0;
  for (int t = 0; t < trials; ++t) {
    CounterRng rng(seed, 200 + static_cast<std::uint64_t>(t));
    const BlockStructure structure({BlockSpec{2, 2, random_power(rng), random_power(rng)},
                                    BlockSpec{2, 1, random_power(rng), ScalarPenalty::characteristic_at_one()}});
    const Index n = 2 + static_cast<Index>(rng.below(2));
    const Matrix phi = rng.normal_matrix(n, structure.total_params());
    const Vector y = 2.0 * rng.normal_vector(n);
    const FeatureOperator op{phi, structure.column_ranges(), Vector::Zero(n), y, 1};
    const AdaptiveSolution sol = solve_effective(op, structure);
    const double oracle = brute_force_oracle(op, structure);
    gap = std::max(gap, (sol.objective - oracle) / std::max(1.0, std::abs(oracle)));
    double triple_sum = 0.0;
    for (std::size_t l = 0; l < structure.size(); ++l) {
      const BlockFactorization& f = sol.factorizations[l];
      recon = std::max(recon, (f.product() - sol.blocks[l]).norm());
      triple_sum += f.objective(structure[l].left, structure[l].right);
    }
    per_value = std::max(per_value, std::abs(triple_sum - sol.objective));
  }
  return {at_most("effective_minus_oracle_relative", gap, 1e-3), at_most("factorization_reconstruction", recon, 1e-8),
          at_most("per_singular_value_objective_gap", per_value, 1e-6)};
}

std::vector<CheckResult> triple_suite(int trials, std::uint64_t seed) {
  double feas = 0.0;
  double effective_gap = 0.0;
  double grid_slack = -1e300;
  for (int t = 0; t < trials; ++t) {
    CounterRng rng(seed, 300 + static_cast<std::uint64_t>(t));
    const ScalarPenalty left = random_power(rng);
    const ScalarPenalty right = random_power(rng);
    const double d = rng.uniform(0.05, 5.0);
    const TripleSolution sol = solve_triple(left, right, d);
    feas = std::max(feas, std::abs(sol.s1 * sol.sigma * sol.s2 - d) / d);
    const double eff = effective_scalar_penalty(ScalarPenalty::joint(left, right), d).value;
    effective_gap = std::max(effective_gap, std::abs(eff - sol.objective));
    double best = 1e300;
    const double hi = std::max(2.0, 2.0 * d);
    constexpr int kGrid = 300;
    for (int i = 0; i <= kGrid; ++i) {
      const double s1 = 1.0 + (hi - 1.0) * i / kGrid;
      for (int j = 0; j <= kGrid; ++j) {
        const double s2 = 1.0 + (hi - 1.0) * j / kGrid;
        const double sigma = d / (s1 * s2);
        best = std::min(best, left(s1) + right(s2) + sigma * sigma);
      }
    }
    grid_slack = std::max(grid_slack, sol.objective - best);
  }
  return {at_most("feasibility_relative", feas, 1e-9), at_most("triple_vs_effective_penalty", effective_gap, 1e-6),
          at_most("triple_minus_grid_minimum", grid_slack, 1e-9)};
}

std::vector<CheckResult> effective_penalty_suite(int trials, std::uint64_t seed) {
  CounterRng rng(seed, 400);
  std::vector<ScalarPenalty> penalties = {ScalarPenalty::power_deviation(1.0), ScalarPenalty::power_deviation(2.0),
                                          ScalarPenalty::power_deviation(4.0),
                                          ScalarPenalty::joint(ScalarPenalty::power_deviation(2.0),
                                                               ScalarPenalty::power_deviation(1.0))};
  for (int t = 0; t < trials; ++t) penalties.push_back(ScalarPenalty::joint(random_power(rng), random_power(rng)));
  double concavity = -1e300;
  double bound = -1e300;
  double ratio_lo = 1e300;
  double ratio_hi = -1e300;
  constexpr int kGrid = 200;
  const double umax = 25.0;
  for (const ScalarPenalty& omega : penalties) {
    std::vector<double> f(kGrid + 1);
    for (int i = 0; i <= kGrid; ++i) {
      const double u = umax * i / kGrid;
      f[static_cast<std::size_t>(i)] = effective_scalar_penalty(omega, std::sqrt(u)).value;
      bound = std::max(bound, f[static_cast<std::size_t>(i)] - u);
    }
    for (std::size_t i = 1; i < f.size() - 1; ++i) concavity = std::max(concavity, f[i - 1] - 2.0 * f[i] + f[i + 1]);
    const double v = 1e-3;
    const double ratio = effective_scalar_penalty(omega, v).value / (v * v);
    ratio_lo = std::min(ratio_lo, ratio);
    ratio_hi = std::max(ratio_hi, ratio);
  }
  return {at_most("max_second_difference_in_v_squared", concavity, 1e-8),
          at_most("max_excess_over_v_squared", bound, 1e-12), at_least("min_ratio_at_1e-3", ratio_lo, 0.95),
          at_most("max_ratio_at_1e-3", ratio_hi, 1.0)};
}

std::vector<CheckResult> joint_monotone_suite(int trials, std::uint64_t seed) {
  double at_one = 0.0;
  double worst_step = 1e300;
  for (int t = 0; t < trials; ++t) {
    CounterRng rng(seed, 500 + static_cast<std::uint64_t>(t));
    const ScalarPenalty left = random_power(rng);
    const ScalarPenalty right = random_power(rng);
    at_one = std::max(at_one, std::abs(joint_penalty(left, right, 1.0)));
    constexpr int kGrid = 1000;
    double prev = joint_penalty(left, right, 1.0);
    for (int i = 1; i < kGrid; ++i) {
      const double v = 1.0 + 9.0 * i / (kGrid - 1);
      const double cur = joint_penalty(left, right, v);
      worst_step = std::min(worst_step, cur - prev);
      prev = cur;
    }
  }
  return {at_most("abs_joint_at_one", at_one, 0.0),
          {"min_consecutive_increase", worst_step, 0.0, worst_step > 0.0}};
}

std::vector<CheckResult> diag_l1(int trials, std::uint64_t seed) {
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    CounterRng rng(seed, 600 + static_cast<std::uint64_t>(t));
    const Vector beta = 3.0 * rng.normal_vector(1 + static_cast<Index>(rng.below(8)));
    worst = std::max(worst, std::abs(diagonal_effective_penalty_demo(beta) - 2.0 * beta.lpNorm<1>()));
  }
  return {at_most("max_abs_gap_to_twice_l1", worst, 1e-8)};
}

MlpSpec random_spec(CounterRng& rng, int min_layers, int max_layers) {
  MlpSpec spec;
  const int layers = min_layers + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_layers - min_layers + 1)));
  for (int l = 0; l <= layers; ++l) {
    spec.layer_widths.push_back(l == layers ? 1 + static_cast<Index>(rng.below(3)) : 2 + static_cast<Index>(rng.below(5)));
  }
  return spec;
}

std::vector<CheckResult> jacobian_suite(int trials, std::uint64_t seed) {
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    CounterRng rng(seed, 700 + static_cast<std::uint64_t>(t));
    const MlpSpec spec = random_spec(rng, 1, 4);
    const ParamVector theta = init_params(spec, rng);
    const Vector x = rng.normal_vector(spec.input_dim());
    const Matrix analytic = jacobian(spec, theta, x);
    const Matrix numeric =
        finite_difference_jacobian([&](const Vector& th) { return forward(spec, th, x); }, theta, 1e-5);
    worst = std::max(worst, (analytic - numeric).cwiseAbs().maxCoeff() / std::max(1.0, analytic.cwiseAbs().maxCoeff()));
  }
  return {at_most("max_relative_error", worst, 1e-5)};
}

std::vector<bool> activation_pattern(const MlpSpec& spec, const ParamVector& theta, const Vector& x) {
  const std::vector<Matrix> w = layer_weights(spec, theta);
  std::vector<bool> pattern;
  Eigen::RowVectorXd h = x.transpose();
  for (std::size_t l = 0; l + 1 < w.size(); ++l) {
    const Eigen::RowVectorXd pre = h * w[l];
    for (Index k = 0; k < pre.size(); ++k) pattern.push_back(pre(k) > 0.0);
    h = pre.cwiseMax(0.0);
  }
  return pattern;
}

bool kink_free(const MlpSpec& spec, const ParamVector& a, const ParamVector& b, const Vector& x) {
  constexpr int kProbe = 4000;
  const std::vector<bool> first = activation_pattern(spec, a, x);
  for (int i = 1; i <= kProbe; ++i) {
    const double t = static_cast<double>(i) / kProbe;
    if (activation_pattern(spec, (1.0 - t) * a + t * b, x) != first) return false;
  }
  return true;
}

double path_error(const MlpSpec& spec, const ParamVector& a, const ParamVector& b, const Vector& x, int n) {
  const Vector df = forward(spec, b, x) - forward(spec, a, x);
  const Matrix avg = path_averaged_features(spec, a, b, x, n);
  return (avg * (b - a) - df).norm() / std::max(df.norm(), 1e-300);
}

std::vector<CheckResult> path_average_suite(int trials, std::uint64_t seed) {
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    CounterRng rng(seed, 800 + static_cast<std::uint64_t>(t));
    const MlpSpec spec = random_spec(rng, 2, 2);
    const ParamVector a = init_params(spec, rng);
    const ParamVector b = init_params(spec, rng);
    const Vector x = rng.normal_vector(spec.input_dim());
    worst = std::max(worst, path_error(spec, a, b, x, 201));
  }

  // Convergence on paths that keep every ReLU on one side.
  double worst_ratio = 1e300;
  int found = 0;
  for (int t = 0; t < trials; ++t) {
    CounterRng rng(seed, 850 + static_cast<std::uint64_t>(t));
    for (int attempt = 0; attempt < 500; ++attempt) {
      const MlpSpec spec{{3 + static_cast<Index>(rng.below(3)), 4 + static_cast<Index>(rng.below(3)),
                          4 + static_cast<Index>(rng.below(3)), 1}};
      const ParamVector a = init_params(spec, rng);
      const ParamVector b = a + 0.2 * rng.normal_vector(a.size(), 1.0 / std::sqrt(3.0));
      const Vector x = rng.normal_vector(spec.input_dim());
      if (!kink_free(spec, a, b, x)) continue;
      const double e101 = path_error(spec, a, b, x, 101);
      const double e401 = path_error(spec, a, b, x, 401);
      if (e401 > 0.0) worst_ratio = std::min(worst_ratio, e101 / e401);
      ++found;
      break;
    }
  }
  return {at_most("max_relative_error_201_points", worst, 1e-3),
          at_least("kink_free_paths_found", found, trials),
          at_least("min_error_ratio_101_over_401", worst_ratio, 3.0)};
}

}  // namespace

bool SuiteReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

std::string SuiteReport::to_json() const {
  nlohmann::ordered_json j;
  j["suite"] = suite;
  j["trials"] = trials;
  j["seed"] = seed;
  j["passed"] = passed();
  j["checks"] = nlohmann::ordered_json::array();
  for (const CheckResult& c : checks) {
    j["checks"].push_back({{"name", c.name}, {"value", c.value}, {"threshold", c.threshold}, {"passed", c.passed}});
  }
  return j.dump(2);
}

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {"theorem1", "theorem2", "lemma5",   "prop3",
                                                 "prop4",    "diag-l1",  "jacobian", "eq2-path"};
  return names;
}

SuiteReport run_suite(const std::string& suite, int trials, std::uint64_t seed) {
  using Runner = std::function<std::vector<CheckResult>(int, std::uint64_t)>;
  static const std::map<std::string, Runner> runners = {
      {"theorem1", structureless_suite}, {"theorem2", blockwise_suite}, {"lemma5", triple_suite},          {"prop3", effective_penalty_suite},
      {"prop4", joint_monotone_suite},       {"diag-l1", diag_l1},   {"jacobian", jacobian_suite}, {"eq2-path", path_average_suite}};
  const auto it = runners.find(suite);
  if (it == runners.end()) throw std::invalid_argument("unknown check suite: " + suite);
  if (trials <= 0) throw std::invalid_argument("trials must be positive");
  SuiteReport report;
  report.suite = suite;
  report.trials = trials;
  report.seed = seed;
  report.checks = it->second(trials, seed);
  return report;
}

}  // namespace adaptfeat::tools
