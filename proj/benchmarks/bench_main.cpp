#include <benchmark/benchmark.h>

#include "adaptfeat/kernel.hpp"
#include "adaptfeat/mlp.hpp"
#include "adaptfeat/penalty.hpp"
#include "adaptfeat/rng.hpp"
#include "adaptfeat/solvers.hpp"

using namespace adaptfeat;

static void BM_Svd(benchmark::State& state) {
  const Index n = state.range(0);
  CounterRng rng(1);
  const Matrix a = rng.normal_matrix(n, n);
  for (auto _ : state) benchmark::DoNotOptimize(svd(a));
}
BENCHMARK(BM_Svd)->Arg(8)->Arg(32)->Arg(128);

static void BM_EffectivePenalty(benchmark::State& state) {
  const ScalarPenalty omega = state.range(0) == 0
                                  ? ScalarPenalty::power_deviation(2.0)
                                  : ScalarPenalty::joint(ScalarPenalty::power_deviation(2.0),
                                                         ScalarPenalty::power_deviation(1.0));
  double v = 0.5;
  for (auto _ : state) {
    benchmark::DoNotOptimize(effective_scalar_penalty(omega, v));
    v = v < 5.0 ? v + 0.01 : 0.5;
  }
}
BENCHMARK(BM_EffectivePenalty)->Arg(0)->Arg(1);

static void BM_JacobianBatch(benchmark::State& state) {
  CounterRng rng(2);
  const MlpSpec spec{{20, state.range(0), state.range(0), 1}};
  const ParamVector theta = init_params(spec, rng);
  const Matrix x = rng.normal_matrix(64, 20);
  for (auto _ : state) benchmark::DoNotOptimize(jacobian_batch(spec, theta, x));
}
BENCHMARK(BM_JacobianBatch)->Arg(32)->Arg(128);

static void BM_KernelFromFeatures(benchmark::State& state) {
  CounterRng rng(3);
  const Matrix features = rng.normal_matrix(state.range(0), 4096);
  for (auto _ : state) benchmark::DoNotOptimize(kernel_from_features(features));
}
BENCHMARK(BM_KernelFromFeatures)->Arg(64)->Arg(200);

static void BM_SolveEffective(benchmark::State& state) {
  CounterRng rng(4);
  const BlockStructure structure({BlockSpec{4, 3, ScalarPenalty::power_deviation(2.0), ScalarPenalty::power_deviation(1.0)},
                                  BlockSpec{3, 1, ScalarPenalty::power_deviation(2.0), ScalarPenalty::characteristic_at_one()}});
  const Matrix phi = rng.normal_matrix(6, structure.total_params());
  const FeatureOperator op{phi, structure.column_ranges(), Vector::Zero(6), rng.normal_vector(6), 1};
  for (auto _ : state) benchmark::DoNotOptimize(solve_effective(op, structure));
}
BENCHMARK(BM_SolveEffective);

static void BM_SolveBilinearStructureless(benchmark::State& state) {
  CounterRng rng(5);
  const Matrix phi = rng.normal_matrix(8, 30);
  const FeatureOperator op = FeatureOperator::single_block(phi, Vector::Zero(8), rng.normal_vector(8));
  const BlockStructure structure = BlockStructure::structureless(30, ScalarPenalty::power_deviation(2.0));
  for (auto _ : state) benchmark::DoNotOptimize(solve_bilinear(op, structure));
}
BENCHMARK(BM_SolveBilinearStructureless);
BENCHMARK_MAIN();
