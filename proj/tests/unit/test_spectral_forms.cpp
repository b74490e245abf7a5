#include <doctest.h>

#include <cmath>

#include "adaptfeat/rng.hpp"
#include "adaptfeat/spectral_forms.hpp"
#include "oracles.hpp"

using namespace adaptfeat;

namespace {

// min over (s1, s2) on a grid of ω1(s1) + ω2(s2) + d² / (s1 s2)².
double triple_grid(const ScalarPenalty& a, const ScalarPenalty& b, double d) {
  const double hi = std::max(3.0, 2.0 * d);
  double best = 1e300;
  const int n = 600;
  for (int i = 0; i <= n; ++i) {
    const double s1 = 1.0 + (hi - 1.0) * i / n;
    for (int j = 0; j <= n; ++j) {
      const double s2 = 1.0 + (hi - 1.0) * j / n;
      const double sigma = d / (s1 * s2);
      best = std::min(best, a(s1) + b(s2) + sigma * sigma);
    }
  }
  return best;
}

}  // namespace

TEST_CASE("solve_triple is feasible and no worse than a grid search") {
  CounterRng rng(31);
  const double exps[] = {1.0, 2.0, 3.0};
  for (int t = 0; t < 6; ++t) {
    const ScalarPenalty a = ScalarPenalty::power_deviation(exps[rng.below(3)]);
    const ScalarPenalty b = ScalarPenalty::power_deviation(exps[rng.below(3)]);
    const double d = rng.uniform(0.1, 4.0);
    const TripleSolution s = solve_triple(a, b, d);
    CHECK(s.s1 >= 1.0);
    CHECK(s.s2 >= 1.0);
    CHECK(s.s1 * s.sigma * s.s2 == doctest::Approx(d).epsilon(1e-12));
    const double grid = triple_grid(a, b, d);
    CHECK(s.objective <= grid + 1e-9);
    CHECK(s.objective >= grid - 1e-3);
    CHECK(s.objective == doctest::Approx(effective_scalar_penalty(ScalarPenalty::joint(a, b), d).value).epsilon(1e-9));
  }
}

TEST_CASE("solve_triple edge cases") {
  const ScalarPenalty w = ScalarPenalty::power_deviation(2.0);
  const ScalarPenalty c = ScalarPenalty::characteristic_at_one();
  const TripleSolution zero = solve_triple(w, w, 0.0);
  CHECK(zero.objective == 0.0);
  CHECK(zero.s1 == 1.0);
  const TripleSolution frozen = solve_triple(c, c, 2.0);
  CHECK(frozen.sigma == doctest::Approx(2.0));
  CHECK(frozen.objective == doctest::Approx(4.0));
  CHECK_THROWS_AS(solve_triple(ScalarPenalty::pure_quadratic(), w, 1.0), DomainError);
  CHECK_THROWS_AS(solve_triple(w, w, -1.0), DomainError);
}

TEST_CASE("structureless solution matches the closed form") {
  CounterRng rng(32);
  const ScalarPenalty w = ScalarPenalty::power_deviation(2.0);
  const Vector beta = rng.normal_vector(10);
  const StructurelessSolution sol = structureless_solution(beta, w);
  const Matrix m = sol.transform(10);
  CHECK((m * sol.theta_delta - beta).norm() < 1e-12);
  CHECK((m - m.transpose()).norm() < 1e-14);
  const double norm = beta.norm();
  const double expected = oracle::effective_power(2.0, norm);
  CHECK(sol.objective(w) == doctest::Approx(expected).epsilon(1e-9));
  // Eigenvalue s along β̂, one elsewhere.
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
  CHECK(eig.eigenvalues().maxCoeff() == doctest::Approx(sol.s));
  CHECK(eig.eigenvalues().minCoeff() == doctest::Approx(1.0));
  const StructurelessSolution none = structureless_solution(Vector::Zero(4), w);
  CHECK(none.s == 1.0);
  CHECK(none.theta_delta.norm() == 0.0);
}

TEST_CASE("factorize_block reconstructs and splits the objective per singular value") {
  CounterRng rng(33);
  const ScalarPenalty a = ScalarPenalty::power_deviation(2.0);
  const ScalarPenalty b = ScalarPenalty::power_deviation(1.0);
  for (const auto& shape : {std::pair<Index, Index>{3, 2}, {2, 4}, {3, 3}}) {
    const Matrix bhat = 2.0 * rng.normal_matrix(shape.first, shape.second);
    const BlockFactorization f = factorize_block(bhat, a, b);
    CHECK((f.product() - bhat).norm() <= 1e-8);
    CHECK((f.coefficients() - bhat).norm() <= 1e-10);
    double expected = 0.0;
    for (Index j = 0; j < f.d.size(); ++j) expected += effective_scalar_penalty(ScalarPenalty::joint(a, b), f.d(j)).value;
    CHECK(f.objective(a, b) == doctest::Approx(expected).epsilon(1e-9));
    for (Index j = std::min(shape.first, shape.second); j < f.s1.size(); ++j) CHECK(f.s1(j) == 1.0);
    for (Index j = std::min(shape.first, shape.second); j < f.s2.size(); ++j) CHECK(f.s2(j) == 1.0);
  }
}

TEST_CASE("adapted kernel equals the Kronecker assembly of M^2") {
  CounterRng rng(34);
  const ScalarPenalty a = ScalarPenalty::power_deviation(2.0);
  const ScalarPenalty b = ScalarPenalty::power_deviation(1.0);
  const BlockStructure structure({BlockSpec{3, 2, a, b}, BlockSpec{2, 1, a, ScalarPenalty::characteristic_at_one()}});
  const Index n = 4;
  const Matrix phi = rng.normal_matrix(n, structure.total_params());
  const FeatureOperator op{phi, structure.column_ranges(), Vector::Zero(n), rng.normal_vector(n), 1};
  std::vector<BlockFactorization> factors = {factorize_block(rng.normal_matrix(3, 2), a, b),
                                             factorize_block(rng.normal_matrix(2, 1), a, ScalarPenalty::characteristic_at_one())};
  // M acts on vec(W) as (M2^T ⊗ M1); assemble M² explicitly.
  Matrix m2 = Matrix::Zero(structure.total_params(), structure.total_params());
  Index offset = 0;
  for (const BlockFactorization& f : factors) {
    const Matrix big = oracle::kron(f.right_transform().transpose(), f.left_transform());
    m2.block(offset, offset, big.rows(), big.cols()) = big * big;
    offset += big.rows();
  }
  const Matrix direct = phi * m2 * phi.transpose();
  const KernelMatrix k = adapted_kernel_correction(factors, op);
  CHECK((k.gram() - direct).norm() <= 1e-10 * direct.norm());
  CHECK(k.is_psd());
  const auto transforms = squared_transforms(factors, op.block_ranges);
  const KernelMatrix k2 = kernel_from_features(phi, transforms, 1);
  CHECK((k2.gram() - direct).norm() <= 1e-10 * direct.norm());
}

TEST_CASE("structureless adapted kernel is a rank-one correction by the label kernel") {
  CounterRng rng(35);
  const ScalarPenalty w = ScalarPenalty::power_deviation(2.0);
  const Matrix phi = rng.normal_matrix(6, 12);
  const Vector y = rng.normal_vector(6);
  const Vector beta = min_norm_solve(phi, y);
  const StructurelessSolution sol = structureless_solution(beta, w);
  const Matrix m = sol.transform(12);
  const KernelMatrix k = kernel_from_features(phi, std::vector<BlockTransform>{
      BlockTransform{{0, 12}, 12, 1, m * m, Matrix::Identity(1, 1)}});
  const Matrix k0 = phi * phi.transpose();
  const Matrix deltas = phi * beta;  // predictions of the linearized model
  const Matrix expected = k0 + (sol.s * sol.s - 1.0) / beta.squaredNorm() * label_kernel(deltas).gram();
  CHECK((k.gram() - expected).norm() <= 1e-8 * expected.norm());
}

TEST_CASE("block structure validation") {
  const ScalarPenalty w = ScalarPenalty::power_deviation(2.0);
  const BlockStructure ok({BlockSpec{3, 4, w, w}, BlockSpec{4, 2, w, ScalarPenalty::characteristic_at_one()}});
  CHECK(ok.total_params() == 20);
  CHECK(ok.column_ranges()[1].begin == 12);
  CHECK_NOTHROW(ok.validate_network_form(2));
  CHECK_THROWS_AS(ok.validate_network_form(3), ShapeError);
  const BlockStructure bad({BlockSpec{3, 2, w, w}});
  CHECK_THROWS_AS(bad.validate_network_form(2), DomainError);
  CHECK_THROWS_AS(BlockStructure({BlockSpec{0, 2, w, w}}), ShapeError);
  CHECK(combined_penalty(w, ScalarPenalty::characteristic_at_one()) == w);
}
