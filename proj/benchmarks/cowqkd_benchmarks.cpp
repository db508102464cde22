#include <cowqkd/keyrate_pipeline.hpp>

#include <benchmark/benchmark.h>

using namespace cowqkd;

namespace {

BlockConfig config(int m, PhaseMode mode) {
  BlockConfig c;
  c.m = m;
  c.mu = 0.01;
  c.phase_mode = mode;
  return c;
}

PhaseMode mode_of(const benchmark::State& s) { return s.range(1) ? PhaseMode::randomized : PhaseMode::pure; }

void BM_ObservedConstraints(benchmark::State& state) {
  const auto cfg = config(static_cast<int>(state.range(0)), mode_of(state));
  const auto params = ChannelParams::from_loss_db(10);
  for (auto _ : state) benchmark::DoNotOptimize(observed_constraints(cfg, params, false));
}
BENCHMARK(BM_ObservedConstraints)->Args({2, 0})->Args({3, 0})->Args({3, 1})->Args({4, 0});

void BM_BuildProblem(benchmark::State& state) {
  const auto cfg = config(static_cast<int>(state.range(0)), mode_of(state));
  const auto params = ChannelParams::from_loss_db(10);
  for (auto _ : state) benchmark::DoNotOptimize(build_phase_error_problem(cfg, params));
}
BENCHMARK(BM_BuildProblem)->Args({2, 0})->Args({3, 0})->Args({3, 1})->Unit(benchmark::kMillisecond);

void BM_SolveReduced(benchmark::State& state) {
  const auto cfg = config(static_cast<int>(state.range(0)), mode_of(state));
  const auto prob = build_phase_error_problem(cfg, ChannelParams::from_loss_db(10));
  for (auto _ : state) benchmark::DoNotOptimize(solve(prob.sdp));
  state.counters["constraints"] = prob.sdp.num_constraints();
}
BENCHMARK(BM_SolveReduced)->Args({2, 0})->Args({3, 0})->Args({3, 1})->Unit(benchmark::kMillisecond);

void BM_SolveFull(benchmark::State& state) {
  const auto cfg = config(2, mode_of(state));
  const auto params = ChannelParams::from_loss_db(10);
  for (auto _ : state) benchmark::DoNotOptimize(max_phase_error_full(cfg, params));
}
BENCHMARK(BM_SolveFull)->Args({2, 0})->Unit(benchmark::kMillisecond);

void BM_MonteCarlo(benchmark::State& state) {
  const auto cfg = config(3, PhaseMode::pure);
  const auto params = ChannelParams::from_loss_db(3);
  for (auto _ : state) benchmark::DoNotOptimize(monte_carlo_oracle(cfg, params, 5, 1, 100000, 7));
  state.SetItemsProcessed(state.iterations() * 100000);
}
BENCHMARK(BM_MonteCarlo)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
