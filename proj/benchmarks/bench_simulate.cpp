#include <benchmark/benchmark.h>

#include "upmdp/benchmarks.hpp"
#include "upmdp/learn.hpp"
#include "upmdp/rng.hpp"
#include "upmdp/simulate.hpp"

static void BM_Collect(benchmark::State& state, const char* name) {
  const auto pmdp = upmdp::build_benchmark(name);
  auto rng = upmdp::make_rng(3, upmdp::Phase::Misc, 0);
  const auto inst = upmdp::instantiate(pmdp, upmdp::sample_valuation(pmdp.parameters(), rng));
  for (auto _ : state) {
    auto counts = upmdp::collect_counts(inst, upmdp::BehaviorPolicy::uniform(), {1000, 200, true}, rng);
    benchmark::DoNotOptimize(counts);
  }
}
BENCHMARK_CAPTURE(BM_Collect, chain, "chain")->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Collect, uav, "uav")->Unit(benchmark::kMillisecond);

static void BM_LearnPac(benchmark::State& state) {
  const auto pmdp = upmdp::build_benchmark("betting");
  auto rng = upmdp::make_rng(5, upmdp::Phase::Misc, 0);
  const auto inst = upmdp::instantiate(pmdp, upmdp::sample_valuation(pmdp.parameters(), rng));
  const auto counts = upmdp::collect_counts(inst, upmdp::BehaviorPolicy::uniform(), {10000, 200, true}, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(upmdp::learn_pac_imdp(pmdp, counts, {1e-4}));
  }
}
BENCHMARK(BM_LearnPac)->Unit(benchmark::kMillisecond);
