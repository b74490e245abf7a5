#include <doctest.h>

#include <cmath>

#include "adaptfeat/rng.hpp"
#include "adaptfeat/solvers.hpp"

using namespace adaptfeat;

namespace {

FeatureOperator random_operator(CounterRng& rng, const BlockStructure& s, Index n) {
  return FeatureOperator{rng.normal_matrix(n, s.total_params()), s.column_ranges(), Vector::Zero(n),
                         2.0 * rng.normal_vector(n), 1};
}

}  // namespace

TEST_CASE("solver config json round trip and validation") {
  SolverConfig cfg;
  cfg.max_iter = 77;
  cfg.tol = 1e-6;
  cfg.continuation = {1.0, 10.0};
  const SolverConfig back = SolverConfig::from_json(cfg.to_json());
  CHECK(back.max_iter == 77);
  CHECK(back.tol == 1e-6);
  CHECK(back.continuation == cfg.continuation);
  CHECK(SolverConfig::from_json("{}").max_iter == SolverConfig{}.max_iter);
  CHECK_THROWS_AS(SolverConfig::from_json("{\"tol\": -1}"), Error);
  CHECK_THROWS_AS(SolverConfig::from_json("{\"continuation\": [10, 1]}"), Error);
  CHECK_THROWS_AS(SolverConfig::from_json("not json"), Error);
}

TEST_CASE("min-norm solver") {
  CounterRng rng(41);
  const Matrix phi = rng.normal_matrix(3, 6);
  const Vector y = rng.normal_vector(3);
  const Vector f0 = rng.normal_vector(3);
  const AdaptiveSolution sol = solve_min_norm(FeatureOperator::single_block(phi, f0, y));
  CHECK(sol.constraint_residual < 1e-12);
  CHECK(sol.objective == doctest::Approx(sol.coefficients().squaredNorm()));
  CHECK((sol.coefficients() - phi.transpose() * (phi * phi.transpose()).ldlt().solve(y - f0)).norm() < 1e-12);
}

TEST_CASE("effective solver with frozen transforms reduces to min-norm") {
  CounterRng rng(42);
  const ScalarPenalty c = ScalarPenalty::characteristic_at_one();
  const BlockStructure s({BlockSpec{2, 2, c, c}, BlockSpec{2, 1, c, c}});
  const FeatureOperator op = random_operator(rng, s, 3);
  const AdaptiveSolution sol = solve_effective(op, s);
  const Vector mn = min_norm_solve(op.phi, op.rhs());
  CHECK((sol.coefficients() - mn).norm() < 1e-8);
  CHECK(sol.objective == doctest::Approx(mn.squaredNorm()).epsilon(1e-8));
}

TEST_CASE("effective solver matches the brute-force oracle") {
  CounterRng rng(43);
  const BlockStructure s({BlockSpec{2, 2, ScalarPenalty::power_deviation(2), ScalarPenalty::power_deviation(1)},
                          BlockSpec{2, 1, ScalarPenalty::power_deviation(1), ScalarPenalty::characteristic_at_one()}});
  const FeatureOperator op = random_operator(rng, s, 4);  // null-space dimension 2
  const AdaptiveSolution sol = solve_effective(op, s);
  CHECK(sol.converged);
  CHECK(sol.constraint_residual < 1e-8);
  const double oracle = brute_force_oracle(op, s);
  CHECK(std::abs(sol.objective - oracle) <= 1e-3 * std::max(1.0, oracle));
  CHECK(sol.objective == doctest::Approx(effective_objective(sol.coefficients(), s)));
  for (std::size_t l = 0; l < s.size(); ++l) CHECK((sol.factorizations[l].product() - sol.blocks[l]).norm() < 1e-8);
}

TEST_CASE("effective solver reports infeasibility") {
  const ScalarPenalty w = ScalarPenalty::power_deviation(2);
  const BlockStructure s = BlockStructure::structureless(2, w);
  Matrix phi(2, 2);
  phi << 1, 0, 1, 0;
  Vector y(2);
  y << 1, 2;
  CHECK_THROWS_AS(solve_effective(FeatureOperator::single_block(phi, Vector::Zero(2), y), s), InfeasibleError);
}

TEST_CASE("solvers reject a mismatched structure") {
  CounterRng rng(44);
  const BlockStructure s = BlockStructure::structureless(5, ScalarPenalty::power_deviation(2));
  const FeatureOperator op = FeatureOperator::single_block(rng.normal_matrix(2, 6), Vector::Zero(2), rng.normal_vector(2));
  CHECK_THROWS_AS(solve_effective(op, s), ShapeError);
  CHECK_THROWS_AS(solve_bilinear(op, s), ShapeError);
}

TEST_CASE("bilinear solver agrees with the structureless closed form") {
  CounterRng rng(45);
  const ScalarPenalty w = ScalarPenalty::power_deviation(2);
  const Matrix phi = rng.normal_matrix(4, 10);
  const Vector y = rng.normal_vector(4);
  const AdaptiveSolution sol = solve_bilinear(FeatureOperator::single_block(phi, Vector::Zero(4), y),
                                              BlockStructure::structureless(10, w));
  const Vector beta = min_norm_solve(phi, y);
  const StructurelessSolution closed = structureless_solution(beta, w);
  CHECK(sol.converged);
  CHECK(std::abs(sol.objective - closed.objective(w)) <= 1e-3 * closed.objective(w));
  CHECK((sol.coefficients() - beta).norm() <= 1e-6);
  REQUIRE(sol.bilinear.size() == 1);
  CHECK((sol.bilinear[0].left * sol.bilinear[0].weights * sol.bilinear[0].right - sol.blocks[0]).norm() < 1e-12);
}

TEST_CASE("bilinear trace is monotone within each continuation level") {
  CounterRng rng(46);
  const BlockStructure s({BlockSpec{2, 2, ScalarPenalty::power_deviation(2), ScalarPenalty::power_deviation(2)},
                          BlockSpec{2, 1, ScalarPenalty::power_deviation(2), ScalarPenalty::characteristic_at_one()}});
  const FeatureOperator op = random_operator(rng, s, 3);
  const AdaptiveSolution sol = solve_bilinear(op, s);
  REQUIRE(!sol.level_starts.empty());
  for (std::size_t level = 0; level < sol.level_starts.size(); ++level) {
    const std::size_t end = level + 1 < sol.level_starts.size() ? sol.level_starts[level + 1] : sol.trace.size();
    for (std::size_t i = sol.level_starts[level] + 1; i < end; ++i) CHECK(sol.trace[i] <= sol.trace[i - 1]);
  }
  CHECK(sol.constraint_residual < 1e-6);
  // The bilinear value can never beat the global optimum of the effective form.
  CHECK(sol.objective >= brute_force_oracle(op, s) - 1e-6);
}

TEST_CASE("bilinear solver with zero right-hand side stays at the identity") {
  CounterRng rng(47);
  const Matrix phi = rng.normal_matrix(3, 5);
  const Vector f0 = rng.normal_vector(3);
  const AdaptiveSolution sol = solve_bilinear(FeatureOperator::single_block(phi, f0, f0),
                                              BlockStructure::structureless(5, ScalarPenalty::power_deviation(2)));
  CHECK(sol.objective == doctest::Approx(0.0));
  CHECK((sol.bilinear[0].left - Matrix::Identity(5, 5)).norm() < 1e-12);
}

TEST_CASE("oracle rejects large null spaces") {
  CounterRng rng(48);
  const BlockStructure s = BlockStructure::structureless(10, ScalarPenalty::power_deviation(2));
  const FeatureOperator op = FeatureOperator::single_block(rng.normal_matrix(2, 10), Vector::Zero(2), rng.normal_vector(2));
  CHECK_THROWS_AS(brute_force_oracle(op, s), DomainError);
}
