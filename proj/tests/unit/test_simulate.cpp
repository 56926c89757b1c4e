#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/binomial.hpp>

#include "upmdp/benchmarks.hpp"
#include "upmdp/error.hpp"
#include "upmdp/learn.hpp"
#include "upmdp/model.hpp"
#include "upmdp/simulate.hpp"

using namespace upmdp;

namespace {

ParametricMDP deterministic_pair() {
  ModelBuilder b(2);
  b.set_initial(0, 1.0);
  b.add_action(0, "go");
  b.add_transition(0, "go", 1, "1");
  b.set_objective({ObjectiveKind::Reach, {1}, {}, Direction::Maximize});
  return b.build();
}

ParametricMDP coin() {
  ModelBuilder b(3);
  b.add_parameter("p", Distribution::uniform(0.1, 0.9));
  b.set_initial(0, 1.0);
  b.add_action(0, "flip");
  b.add_transition(0, "flip", 1, "p");
  b.add_transition(0, "flip", 2, "1 - p");
  b.set_objective({ObjectiveKind::Reach, {1}, {}, Direction::Maximize});
  return b.build();
}

// States 0..n-1 each with one action to n (prob p, tied) or n+1 (1 - p).
ParametricMDP tied_rows(std::size_t n) {
  ModelBuilder b(n + 2);
  b.add_parameter("p", Distribution::uniform(0.1, 0.9));
  b.set_initial(0, 1.0);
  for (std::size_t s = 0; s < n; ++s) {
    b.add_action(s, "a");
    b.add_transition(s, "a", n, "p", "t");
    b.add_transition(s, "a", n + 1, "1 - p");
  }
  b.set_objective({ObjectiveKind::Reach, {n}, {}, Direction::Maximize});
  return b.build();
}

CountTable table(const ParametricMDP& m, const std::vector<std::pair<std::int64_t, std::int64_t>>& rows) {
  CountTable c = CountTable::zeros(m.structure());
  const auto& st = m.structure();
  for (std::size_t s = 0; s < rows.size(); ++s) {
    const std::size_t ch = st.choice_begin[s];
    const std::size_t t = st.trans_begin[ch];
    c.visits[ch] = rows[s].second;
    c.outcomes[t] = rows[s].first;
    c.outcomes[t + 1] = rows[s].second - rows[s].first;
    c.trials[t] = c.trials[t + 1] = rows[s].second;
  }
  return c;
}

}  // namespace

TEST(Collect, DeterministicKernel) {
  const auto m = deterministic_pair();
  const auto inst = instantiate(m, Valuation{});
  Rng rng(1);
  const auto c = collect_counts(inst, BehaviorPolicy::uniform(), {10, 1, true}, rng);
  EXPECT_EQ(c.visits[0], 10);
  EXPECT_EQ(c.outcomes[0], 10);
}

TEST(Collect, BookkeepingAndBudget) {
  for (const auto& name : benchmark_names()) {
    const auto m = build_benchmark(name);
    Rng rng(9);
    const auto inst = instantiate(m, sample_valuation(m.parameters(), rng));
    const auto c = collect_counts(inst, BehaviorPolicy::uniform(), {200, 50, true}, rng);
    EXPECT_NO_THROW(c.check(m.structure())) << name;
    const auto& st = m.structure();
    std::int64_t total = 0;
    for (std::size_t ch = 0; ch < st.num_choices(); ++ch) {
      std::int64_t sum = 0;
      for (std::size_t t = st.trans_begin[ch]; t < st.trans_begin[ch + 1]; ++t) sum += c.outcomes[t];
      EXPECT_EQ(sum, c.visits[ch]);
      total += c.visits[ch];
    }
    EXPECT_LE(total, 200 * 50) << name;
    EXPECT_GT(total, 0) << name;
  }
}

TEST(Collect, SeedDeterminism) {
  const auto m = build_benchmark("aircraft");
  Rng r0(4);
  const auto inst = instantiate(m, sample_valuation(m.parameters(), r0));
  Rng a(77), b(77);
  const auto ca = collect_counts(inst, BehaviorPolicy::uniform(), {300, 100, true}, a);
  const auto cb = collect_counts(inst, BehaviorPolicy::uniform(), {300, 100, true}, b);
  EXPECT_EQ(ca.visits, cb.visits);
  EXPECT_EQ(ca.outcomes, cb.outcomes);
}

TEST(Collect, IncrementalEqualsOneShot) {
  const auto m = build_benchmark("chain");
  const auto inst = instantiate(m, Valuation{{0.4}});
  TrajectoryCollector one(inst, BehaviorPolicy::uniform(), 200, true, 5);
  one.run(1000);
  TrajectoryCollector split(inst, BehaviorPolicy::uniform(), 200, true, 5);
  split.run(100);
  split.run(900);
  EXPECT_EQ(one.counts().outcomes, split.counts().outcomes);
  EXPECT_EQ(split.episodes(), 1000u);
}

TEST(Collect, NoCountsOutsideSupport) {
  // Zero-probability transitions do not exist in the structure, so every
  // recorded outcome belongs to a transition with positive probability.
  const auto m = build_benchmark("semiauto");
  Rng rng(2);
  const auto inst = instantiate(m, sample_valuation(m.parameters(), rng));
  const auto c = collect_counts(inst, BehaviorPolicy::uniform(), {500, 200, true}, rng);
  for (std::size_t t = 0; t < c.outcomes.size(); ++t) {
    if (c.outcomes[t] > 0) EXPECT_GT(inst.probs[t], 0.0);
  }
}

TEST(Collect, BernoulliConcentration) {
  const auto m = coin();
  const auto inst = instantiate(m, Valuation{{0.5}});
  const boost::math::binomial_distribution<double> bin(10000, 0.5);
  const double inside = boost::math::cdf(bin, 5200.0) - boost::math::cdf(bin, 4799.0);
  ASSERT_GT(inside, 0.99);
  int hits = 0;
  const int seeds = 200;
  for (int seed = 0; seed < seeds; ++seed) {
    Rng rng(static_cast<std::uint64_t>(seed));
    const auto c = collect_counts(inst, BehaviorPolicy::uniform(), {10000, 10, true}, rng);
    ASSERT_EQ(c.visits[0], 10000);
    const double est = point_estimate(c, 0);
    if (est >= 0.48 && est <= 0.52) ++hits;
  }
  EXPECT_GE(hits, 198);
}

TEST(Collect, DumpFormat) {
  const auto m = build_benchmark("chain");
  const auto inst = instantiate(m, Valuation{{0.5}});
  const auto dir = std::filesystem::temp_directory_path() / "upmdp_dump_test";
  std::filesystem::remove_all(dir);
  Rng rng(3);
  dump_trajectories(inst, BehaviorPolicy::uniform(), {5, 20, true}, rng, dir);
  std::ifstream in(dir / "trajectories.txt");
  ASSERT_TRUE(in);
  std::string line;
  std::size_t steps = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    long s, a, t;
    ASSERT_TRUE(ls >> s >> a >> t) << line;
    EXPECT_LT(std::size_t(s), m.structure().num_states);
    EXPECT_LT(std::size_t(t), m.structure().num_states);
    ++steps;
  }
  EXPECT_GT(steps, 0u);
  EXPECT_LE(steps, 100u);
}

TEST(Pool, TwoTiedTransitions) {
  const auto m = tied_rows(2);
  const auto raw = table(m, {{10, 20}, {5, 30}});
  const auto pooled = pool_tied_counts(raw, m.tie_partition());
  const auto& st = m.structure();
  for (std::size_t s = 0; s < 2; ++s) {
    const std::size_t t = st.trans_begin[st.choice_begin[s]];
    EXPECT_EQ(pooled.outcomes[t], 15);
    EXPECT_EQ(pooled.trials[t], 50);
    EXPECT_EQ(pooled.outcomes[t + 1], raw.outcomes[t + 1]);
    EXPECT_EQ(pooled.trials[t + 1], raw.trials[t + 1]);
  }
  EXPECT_EQ(raw.outcomes[0], 10);  // input untouched
}

TEST(Pool, ThreeTiedTransitions) {
  const auto m = tied_rows(3);
  const auto pooled = pool_tied_counts(table(m, {{1, 2}, {0, 3}, {4, 5}}), m.tie_partition());
  const auto& st = m.structure();
  for (std::size_t s = 0; s < 3; ++s) {
    const std::size_t t = st.trans_begin[st.choice_begin[s]];
    EXPECT_EQ(pooled.outcomes[t], 5);
    EXPECT_EQ(pooled.trials[t], 10);
  }
}

TEST(Pool, SingletonsUnchangedAndConservation) {
  const auto m = build_benchmark("betting");
  Rng rng(12);
  const auto inst = instantiate(m, sample_valuation(m.parameters(), rng));
  const auto raw = collect_counts(inst, BehaviorPolicy::uniform(), {500, 50, true}, rng);
  const auto none = pool_tied_counts(raw, m.tie_partition(false));
  EXPECT_EQ(none.outcomes, raw.outcomes);
  EXPECT_EQ(none.trials, raw.trials);

  const auto part = m.tie_partition();
  const auto pooled = pool_tied_counts(raw, part);
  for (const auto& cls : part.members) {
    std::int64_t k = 0, h = 0;
    for (auto t : cls) {
      k += raw.outcomes[t];
      h += raw.trials[t];
    }
    for (auto t : cls) {
      EXPECT_EQ(pooled.outcomes[t], k);
      EXPECT_EQ(pooled.trials[t], h);
    }
  }
}

TEST(CountsIo, RoundTrip) {
  const auto m = build_benchmark("chain");
  const auto inst = instantiate(m, Valuation{{0.3}});
  Rng rng(8);
  const auto c = collect_counts(inst, BehaviorPolicy::uniform(), {100, 200, true}, rng);
  const auto again = parse_counts(m.structure(), serialize_counts(m.structure(), c));
  EXPECT_EQ(again.visits, c.visits);
  EXPECT_EQ(again.outcomes, c.outcomes);
  EXPECT_EQ(again.trials, c.trials);
}
