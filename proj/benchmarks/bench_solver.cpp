#include <benchmark/benchmark.h>

#include "upmdp/benchmarks.hpp"
#include "upmdp/imdp.hpp"
#include "upmdp/learn.hpp"
#include "upmdp/rng.hpp"
#include "upmdp/simulate.hpp"

namespace {

upmdp::IntervalMDP learned(const std::string& name, std::size_t trajectories) {
  const auto pmdp = upmdp::build_benchmark(name);
  auto rng = upmdp::make_rng(7, upmdp::Phase::Misc, 0);
  const auto inst = upmdp::instantiate(pmdp, upmdp::sample_valuation(pmdp.parameters(), rng));
  const auto counts =
      upmdp::collect_counts(inst, upmdp::BehaviorPolicy::uniform(), {trajectories, 200, true}, rng);
  return upmdp::learn_pac_imdp(pmdp, counts, {1e-4});
}

}  // namespace

static void BM_RobustOptimize(benchmark::State& state, const char* name) {
  const auto imdp = learned(name, 10000);
  for (auto _ : state) {
    benchmark::DoNotOptimize(upmdp::robust_value_iteration(imdp, true).value);
  }
}
BENCHMARK_CAPTURE(BM_RobustOptimize, chain, "chain")->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_RobustOptimize, betting, "betting")->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_RobustOptimize, aircraft, "aircraft")->Unit(benchmark::kMillisecond);

static void BM_RobustEvaluate(benchmark::State& state) {
  const auto imdp = learned("betting", 10000);
  const auto policy = upmdp::robust_value_iteration(imdp, true).policy;
  for (auto _ : state) {
    benchmark::DoNotOptimize(upmdp::robust_value_iteration(imdp, false, &policy).value);
  }
}
BENCHMARK(BM_RobustEvaluate)->Unit(benchmark::kMillisecond);
