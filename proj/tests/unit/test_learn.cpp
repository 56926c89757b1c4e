#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "../support/oracles.hpp"
#include "upmdp/benchmarks.hpp"
#include "upmdp/error.hpp"
#include "upmdp/learn.hpp"
#include "upmdp/simulate.hpp"
#include "upmdp/special.hpp"

using namespace upmdp;

namespace {

CountTable raw_counts(const ParametricMDP& m, double p, std::size_t trajectories, std::uint64_t seed) {
  const auto inst = instantiate(m, Valuation{{p}});
  Rng rng(seed);
  return collect_counts(inst, BehaviorPolicy::uniform(), {trajectories, 200, true}, rng);
}

ParametricMDP all_known() {
  ModelBuilder b(3);
  b.set_initial(0, 1.0);
  b.add_action(0, "a");
  b.add_transition(0, "a", 1, "0.25");
  b.add_transition(0, "a", 2, "0.75");
  b.set_objective({ObjectiveKind::Reach, {1}, {}, Direction::Maximize});
  return b.build();
}

void expect_feasible_rows(const IntervalMDP& m) {
  const auto& st = m.s();
  for (std::size_t c = 0; c < st.num_choices(); ++c) {
    double lo = 0, hi = 0;
    for (std::size_t t = st.trans_begin[c]; t < st.trans_begin[c + 1]; ++t) {
      EXPECT_GT(m.lo[t], 0.0);
      EXPECT_LE(m.lo[t], m.hi[t]);
      EXPECT_LE(m.hi[t], 1.0);
      lo += m.lo[t];
      hi += m.hi[t];
    }
    EXPECT_LE(lo, 1.0 + 1e-12);
    EXPECT_GE(hi, 1.0 - 1e-12);
  }
}

}  // namespace

TEST(PointEstimate, Ratios) {
  CountTable c;
  c.outcomes = {30, 0, 50};
  c.trials = {100, 50, 50};
  EXPECT_DOUBLE_EQ(point_estimate(c, 0), 0.3);
  EXPECT_DOUBLE_EQ(point_estimate(c, 1), 0.0);
  EXPECT_DOUBLE_EQ(point_estimate(c, 2), 1.0);
  c.trials[1] = 0;
  c.outcomes[1] = 0;
  EXPECT_TRUE(std::isnan(point_estimate(c, 1)));
}

TEST(Wilson, MatchesScoreInversion) {
  for (std::int64_t h : {3, 10, 100, 1000, 100000}) {
    for (double frac : {0.0, 0.01, 0.1, 0.3, 0.5, 0.77, 0.99, 1.0}) {
      const auto k = std::int64_t(std::llround(frac * double(h)));
      for (double z : {1.0, 1.959963984540054, 4.5}) {
        const auto w = wilson_cc_interval(k, h, z);
        const auto [lo, hi] = oracle::wilson_cc(k, h, z);
        EXPECT_NEAR(std::clamp(w.lo, 0.0, 1.0), lo, 1e-9) << k << "/" << h << " z=" << z;
        EXPECT_NEAR(std::clamp(w.hi, 0.0, 1.0), hi, 1e-9) << k << "/" << h << " z=" << z;
      }
    }
  }
}

TEST(Wilson, SymmetricAtHalf) {
  const double z = normal_quantile(1 - 0.05 / 2);
  const auto w = wilson_cc_interval(50, 100, z);
  EXPECT_NEAR(w.lo, 1 - w.hi, 1e-12);
  EXPECT_GT(w.lo, 0.38);
  EXPECT_LT(w.lo, 0.42);
}

TEST(Wilson, ContainsEstimateAndShrinks) {
  const double z = normal_quantile(1 - 1e-5);
  double prev = 2.0;
  for (std::int64_t h : {100, 10000, 1000000}) {
    const auto k = std::int64_t(0.3 * double(h));
    const auto w = wilson_cc_interval(k, h, z);
    EXPECT_LT(w.lo, 0.3);
    EXPECT_GT(w.hi, 0.3);
    EXPECT_LT(w.hi - w.lo, prev);
    prev = w.hi - w.lo;
  }
  EXPECT_LT(prev, 0.01);
}

TEST(LearnPac, AllKnownSpendsNoConfidence) {
  const auto m = all_known();
  const auto imdp = learn_pac_imdp(m, CountTable::zeros(m.structure()), {0.1});
  EXPECT_EQ(imdp.provenance.n_unknown, 0u);
  for (std::size_t t = 0; t < imdp.lo.size(); ++t) EXPECT_EQ(imdp.lo[t], imdp.hi[t]);
}

TEST(LearnPac, UnvisitedRowsAreVacuous) {
  const auto m = build_benchmark("chain");
  const auto imdp = learn_pac_imdp(m, CountTable::zeros(m.structure()), {0.1, 1e-6, false});
  for (std::size_t t = 0; t < imdp.lo.size(); ++t) {
    if (m.is_known(t)) continue;
    EXPECT_EQ(imdp.lo[t], 1e-6);
    EXPECT_EQ(imdp.hi[t], 1.0);
  }
}

TEST(LearnPac, UnknownClassCount) {
  const auto m = build_benchmark("chain");
  EXPECT_EQ(count_unknown_classes(m, true), 2u);  // "p" and "1 - p"
  std::size_t unknown = 0;
  for (std::size_t t = 0; t < m.structure().num_transitions(); ++t) unknown += !m.is_known(t);
  EXPECT_EQ(count_unknown_classes(m, false), unknown);
}

TEST(LearnPac, UsesSplitConfidence) {
  const auto m = build_benchmark("chain");
  const auto c = raw_counts(m, 0.6, 2000, 1);
  const auto imdp = learn_pac_imdp(m, c, {0.1, 1e-6, false});
  const double z = oracle::normal_quantile(1 - 0.1 / double(imdp.provenance.n_unknown) / 2);
  for (std::size_t t = 0; t < imdp.lo.size(); ++t) {
    if (c.trials[t] == 0) continue;
    const auto [lo, hi] = oracle::wilson_cc(c.outcomes[t], c.trials[t], z);
    EXPECT_NEAR(imdp.lo[t], std::max(1e-6, lo), 1e-9);
    EXPECT_NEAR(imdp.hi[t], hi, 1e-9);
  }
}

TEST(LearnPac, TyingNarrowsIntervals) {
  const auto m = build_benchmark("chain");
  const auto c = raw_counts(m, 0.6, 500, 2);
  const auto tied = learn_pac_imdp(m, c, {0.1, 1e-6, true});
  const auto untied = learn_pac_imdp(m, c, {0.1, 1e-6, false});
  double wt = 0, wu = 0;
  for (std::size_t t = 0; t < tied.lo.size(); ++t) {
    wt += tied.hi[t] - tied.lo[t];
    wu += untied.hi[t] - untied.lo[t];
  }
  EXPECT_LT(wt, wu);
}

TEST(LearnPac, InclusionFrequency) {
  // The hidden instance lies in the learned model with probability >= 1 - gamma.
  const auto m = build_benchmark("chain");
  const double gamma = 0.1;
  const int reps = 300;
  Rng theta_rng(42);
  int inside = 0;
  for (int r = 0; r < reps; ++r) {
    const auto v = sample_valuation(m.parameters(), theta_rng);
    const auto inst = instantiate(m, v);
    Rng rng(1000 + std::uint64_t(r));
    const auto c = collect_counts(inst, BehaviorPolicy::uniform(), {300, 200, true}, rng);
    inside += learn_pac_imdp(m, c, {gamma}).includes(inst);
  }
  const double sigma = std::sqrt(gamma * (1 - gamma) / reps);
  EXPECT_GE(double(inside) / reps, 1 - gamma - 3 * sigma);
}

TEST(Lui, Examples) {
  const auto a = lui_update({{0.1, 0.9}, 0.0}, 4, 10);
  EXPECT_DOUBLE_EQ(a.interval.lo, 0.4);
  EXPECT_DOUBLE_EQ(a.interval.hi, 0.4);
  const auto b = lui_update({{0.2, 0.8}, 10.0}, 5, 10);
  EXPECT_DOUBLE_EQ(b.interval.lo, 0.35);
  EXPECT_DOUBLE_EQ(b.interval.hi, 0.65);
  EXPECT_DOUBLE_EQ(b.strength, 20.0);
  const auto c = lui_update({{0.2, 0.8}, 3.0}, 0, 0);
  EXPECT_EQ(c.interval.lo, 0.2);
  EXPECT_EQ(c.strength, 3.0);
  EXPECT_THROW(lui_update({{0.2, 0.8}, 3.0}, 5, 4), ValidationError);
}

TEST(Lui, WidthNonIncreasingForConsistentData) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 1000; ++i) {
    double lo = u(rng), hi = u(rng);
    if (lo > hi) std::swap(lo, hi);
    const std::int64_t n = 1 + std::int64_t(u(rng) * 100);
    const auto k = std::int64_t(std::floor(u(rng) * double(n + 1)));
    if (double(k) / double(n) < lo || double(k) / double(n) > hi) continue;
    const auto post = lui_update({{lo, hi}, u(rng) * 50}, k, n);
    EXPECT_LE(post.interval.hi - post.interval.lo, hi - lo + 1e-15);
  }
}

TEST(Lui, ZeroStrengthGivesPointIntervals) {
  const auto m = build_benchmark("chain");
  const auto c = raw_counts(m, 0.3, 2000, 3);
  PacConfig cfg;
  cfg.tying = false;
  const auto imdp = learn_lui_imdp(m, c, cfg);
  for (std::size_t t = 0; t < imdp.lo.size(); ++t) {
    if (c.trials[t] == 0 || m.is_known(t)) continue;
    EXPECT_EQ(imdp.lo[t], imdp.hi[t]);
    EXPECT_DOUBLE_EQ(imdp.lo[t], point_estimate(c, t));
  }
}

TEST(Map, UniformPriorIsFrequentist) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t m = 1 + rng() % 6;
    std::vector<std::int64_t> k(m);
    std::int64_t n = 0;
    for (auto& x : k) n += (x = std::int64_t(rng() % 1000));
    if (n == 0) continue;
    const auto est = map_estimate(std::vector<double>(m, 1.0), k);
    for (std::size_t j = 0; j < m; ++j) EXPECT_NEAR(est[j], double(k[j]) / double(n), 1e-15);
  }
}

TEST(Map, Examples) {
  const auto a = map_estimate({2, 2}, {3, 5});
  EXPECT_DOUBLE_EQ(a[0], 0.4);
  EXPECT_DOUBLE_EQ(a[1], 0.6);
  const auto b = map_estimate({1, 1}, {0, 0});
  EXPECT_DOUBLE_EQ(b[0], 0.5);
  EXPECT_DOUBLE_EQ(b[1], 0.5);
  EXPECT_THROW(map_estimate({0.5, 1}, {1, 1}), ValidationError);
}

TEST(Ucrl2, RadiusScaling) {
  const double d1 = ucrl2_radius(7, 2, 42, 0.1, 1000);
  EXPECT_NEAR(d1, std::sqrt(14.0 * 7 * std::log(2.0 * 2 * 42 * 10) / 1000), 1e-12);
  for (std::int64_t h : {1, 7, 1000, 123456}) {
    EXPECT_NEAR(ucrl2_radius(7, 2, 42, 0.1, 4 * h), 0.5 * ucrl2_radius(7, 2, 42, 0.1, h), 1e-12);
  }
}

TEST(Ucrl2, SaturatesToVacuous) {
  const auto m = build_benchmark("chain");
  const auto c = raw_counts(m, 0.5, 20, 4);
  PacConfig cfg;
  cfg.tying = false;
  const auto imdp = learn_ucrl2_imdp(m, c, cfg);
  for (std::size_t t = 0; t < imdp.lo.size(); ++t) {
    if (m.is_known(t)) continue;
    // Few visits: the radius exceeds 1 everywhere.
    EXPECT_EQ(imdp.lo[t], cfg.mu);
    EXPECT_EQ(imdp.hi[t], 1.0);
  }
}

TEST(Learners, RowsFeasibleOnAllBenchmarks) {
  for (const auto& name : benchmark_names()) {
    const auto m = build_benchmark(name);
    Rng rng(10);
    const auto inst = instantiate(m, sample_valuation(m.parameters(), rng));
    const auto c = collect_counts(inst, BehaviorPolicy::uniform(), {300, 100, true}, rng);
    for (auto l : {Learner::Pac, Learner::Lui, Learner::Map, Learner::Ucrl2}) {
      for (bool tying : {true, false}) {
        PacConfig cfg;
        cfg.tying = tying;
        SCOPED_TRACE(name + " " + learner_name(l));
        const auto imdp = learn_imdp(l, m, c, cfg);
        expect_feasible_rows(imdp);
      }
    }
  }
}

TEST(Learners, NamesRoundTrip) {
  for (auto l : {Learner::Pac, Learner::Lui, Learner::Map, Learner::Ucrl2}) EXPECT_EQ(parse_learner(learner_name(l)), l);
  EXPECT_THROW(parse_learner("bayes"), ValidationError);
}

TEST(ImdpIo, RoundTrip) {
  const auto m = build_benchmark("betting");
  const auto imdp = learn_pac_imdp(m, raw_counts(m, 0.8, 500, 5), {1e-3});
  const auto again = parse_imdp(m.structure_ptr(), serialize_imdp(imdp));
  EXPECT_EQ(again.lo, imdp.lo);
  EXPECT_EQ(again.hi, imdp.hi);
  EXPECT_EQ(again.provenance.method, "pac");
  EXPECT_EQ(again.provenance.n_unknown, imdp.provenance.n_unknown);
}
