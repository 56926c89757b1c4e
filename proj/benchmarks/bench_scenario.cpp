#include <benchmark/benchmark.h>

#include "upmdp/scenario.hpp"

static void BM_RiskBound(benchmark::State& state) {
  const auto n = state.range(0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(upmdp::risk_bound(n, 1e-4, 1e-2, 5));
  }
}
BENCHMARK(BM_RiskBound)->Arg(100)->Arg(300)->Arg(1000)->Unit(benchmark::kMillisecond);

static void BM_RiskBoundNoGamma(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(upmdp::risk_bound(state.range(0), 0.0, 1e-2, 0));
  }
}
BENCHMARK(BM_RiskBoundNoGamma)->Arg(300)->Arg(10000)->Unit(benchmark::kMillisecond);
