#include <benchmark/benchmark.h>

#include "fconv/experiments.hpp"

using namespace fconv;

namespace {

const SpectralMeasure kBernoulli({-1.0, 1.0}, {0.5, 0.5});

Execution mode(const benchmark::State& state) {
  return state.range(0) == 0 ? Execution::kSerial : Execution::kParallel;
}

void BM_SolveLine(benchmark::State& state) {
  const auto grid = uniform_grid(-3.0, 3.0, 601);
  for (auto _ : state)
    benchmark::DoNotOptimize(solve_line(kBernoulli, kBernoulli, grid, 1e-3, SolverConfig{}, mode(state)));
  state.SetItemsProcessed(state.iterations() * 601);
}
BENCHMARK(BM_SolveLine)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);

void BM_DensityCurve(benchmark::State& state) {
  const SpectralMeasure A({-2.0, -0.5, 0.3, 1.0, 2.5}, {0.1, 0.2, 0.3, 0.25, 0.15});
  const auto grid = default_grid(A, kBernoulli, 2001);
  for (auto _ : state)
    benchmark::DoNotOptimize(density_curve(A, kBernoulli, grid, 1e-2, SolverConfig{}, true, mode(state)));
}
BENCHMARK(BM_DensityCurve)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);

void BM_IdentityGap(benchmark::State& state) {
  for (auto _ : state)
    benchmark::DoNotOptimize(
        pv_identity_gap(kBernoulli, kBernoulli, 16, {0.0, 2.0}, 2000, 0, Ensemble::kUnitary, mode(state)));
}
BENCHMARK(BM_IdentityGap)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);

void BM_VarianceReplicates(benchmark::State& state) {
  ExperimentConfig cfg;
  cfg.N_list = {100};
  cfg.replicates = 64;
  cfg.exec = mode(state);
  for (auto _ : state) benchmark::DoNotOptimize(variance_scaling_experiment(kBernoulli, kBernoulli, cfg));
}
BENCHMARK(BM_VarianceReplicates)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);

// Serial Jacobi reference against the production eigensolver.
void BM_Eigensolver(benchmark::State& state) {
  const int N = static_cast<int>(state.range(1));
  Philox rng(0, 0);
  const MatrixXc H = conjugate_diagonal(haar_unitary(N, rng), realize_diagonal(kBernoulli, N, Multiplicity::kExact));
  for (auto _ : state) {
    if (state.range(0) == 0)
      benchmark::DoNotOptimize(eig_hermitian_jacobi(H));
    else
      benchmark::DoNotOptimize(eig_hermitian(H));
  }
}
BENCHMARK(BM_Eigensolver)
    ->ArgsProduct({{0, 1}, {32, 128}})
    ->ArgNames({"eigen", "N"})
    ->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
