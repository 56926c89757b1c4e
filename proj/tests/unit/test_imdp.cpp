#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "../support/oracles.hpp"
#include "../support/random_imdp.hpp"
#include "upmdp/benchmarks.hpp"
#include "upmdp/error.hpp"
#include "upmdp/imdp.hpp"
#include "upmdp/learn.hpp"
#include "upmdp/simulate.hpp"

using namespace upmdp;

namespace {

Direction dir_of(int i) { return i % 2 ? Direction::Minimize : Direction::Maximize; }

// Goal with probability in [lo, hi], sink otherwise.
IntervalMDP one_step(double lo, double hi) {
  ModelBuilder b(3);
  b.set_initial(0, 1.0);
  b.add_action(0, "a");
  b.add_transition(0, "a", 1, "0.5");
  b.add_transition(0, "a", 2, "0.5");
  b.set_objective({ObjectiveKind::Reach, {1}, {}, Direction::Maximize});
  const auto m = b.build();
  auto imdp = IntervalMDP::exact(instantiate(m, Valuation{}));
  imdp.lo[0] = lo;
  imdp.hi[0] = hi;
  imdp.lo[1] = 1 - hi;
  imdp.hi[1] = 1 - lo;
  return imdp;
}

std::vector<std::size_t> actions_of(const Policy& p) {
  std::vector<std::size_t> a(p.structure().num_states);
  for (std::size_t s = 0; s < a.size(); ++s) a[s] = p.action_index(s);
  return a;
}

}  // namespace

TEST(Merge, Hull) {
  const auto a = one_step(0.2, 0.4);
  const auto b = one_step(0.3, 0.5);
  const auto m = merge(a, b);
  EXPECT_DOUBLE_EQ(m.lo[0], 0.2);
  EXPECT_DOUBLE_EQ(m.hi[0], 0.5);
  const auto self = merge(a, a);
  EXPECT_EQ(self.lo, a.lo);
  EXPECT_EQ(self.hi, a.hi);
}

TEST(Merge, ContainsMembersAndRejectsMismatch) {
  const auto m = build_benchmark("chain");
  std::vector<IntervalMDP> parts;
  Rng rng(1);
  for (int i = 0; i < 3; ++i) {
    const auto inst = instantiate(m, sample_valuation(m.parameters(), rng));
    parts.push_back(learn_pac_imdp(m, collect_counts(inst, BehaviorPolicy::uniform(), {500, 200, true}, rng), {0.01}));
  }
  const auto merged = merge_all(parts);
  for (const auto& p : parts) {
    for (std::size_t t = 0; t < p.lo.size(); ++t) {
      EXPECT_LE(merged.lo[t], p.lo[t]);
      EXPECT_GE(merged.hi[t], p.hi[t]);
    }
  }
  const auto other = learn_pac_imdp(build_benchmark("betting"),
                                    CountTable::zeros(build_benchmark("betting").structure()), {0.01});
  EXPECT_THROW(merge(parts[0], other), ValidationError);
}

TEST(WorstCase, Examples) {
  const std::size_t succ2[] = {0, 1};
  const double v2[] = {0, 1}, lo2[] = {0.3, 0.3}, hi2[] = {0.7, 0.7};
  double out2[2];
  worst_case_distribution(v2, succ2, lo2, hi2, true, out2);
  EXPECT_DOUBLE_EQ(out2[0], 0.7);
  EXPECT_DOUBLE_EQ(out2[1], 0.3);

  const double one[] = {0.25, 0.75};
  worst_case_distribution(v2, succ2, one, one, true, out2);
  EXPECT_DOUBLE_EQ(out2[0], 0.25);
  EXPECT_DOUBLE_EQ(out2[1], 0.75);
}

TEST(WorstCase, MatchesVertexEnumeration) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  auto check = [&](const std::vector<double>& v, const std::vector<double>& lo, const std::vector<double>& hi) {
    std::vector<std::size_t> succ(v.size());
    for (std::size_t i = 0; i < succ.size(); ++i) succ[i] = i;
    for (bool minimize : {true, false}) {
      std::vector<double> out(v.size());
      worst_case_distribution(v, succ, lo, hi, minimize, out);
      double got = 0, sum = 0;
      for (std::size_t i = 0; i < v.size(); ++i) {
        EXPECT_GE(out[i], lo[i] - 1e-15);
        EXPECT_LE(out[i], hi[i] + 1e-15);
        got += out[i] * v[i];
        sum += out[i];
      }
      EXPECT_NEAR(sum, 1.0, 1e-12);
      double best = minimize ? 1e300 : -1e300;
      for (const auto& x : oracle::interval_vertices(lo, hi)) {
        double val = 0;
        for (std::size_t i = 0; i < v.size(); ++i) val += x[i] * v[i];
        best = minimize ? std::min(best, val) : std::max(best, val);
      }
      EXPECT_NEAR(got, best, 1e-9);
    }
  };
  check({0, 0.5, 1}, {0.1, 0.2, 0.1}, {0.5, 0.6, 0.8});
  for (int i = 0; i < 500; ++i) {
    const std::size_t m = 1 + rng() % 5;
    std::vector<double> v(m), lo(m), hi(m), c(m);
    double s = 0;
    for (auto& x : c) s += (x = u(rng) + 0.01);
    for (std::size_t j = 0; j < m; ++j) {
      c[j] /= s;
      lo[j] = std::max(0.0, c[j] - 0.3 * u(rng));
      hi[j] = std::min(1.0, c[j] + 0.3 * u(rng));
      v[j] = std::floor(u(rng) * 4);  // ties on purpose
    }
    check(v, lo, hi);
  }
}

TEST(RobustVi, OneStepReach) {
  const auto imdp = one_step(0.3, 0.7);
  EXPECT_NEAR(robust_value_iteration(imdp, true).value, 0.3, 1e-12);
  SolverOptions opt;
  opt.nature = Nature::Optimistic;
  EXPECT_NEAR(robust_value_iteration(imdp, imdp.s().objective, true, nullptr, opt).value, 0.7, 1e-12);
}

TEST(RobustVi, SingletonMatchesExact) {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 200; ++i) {
    auto r = oracle::random_imdp(rng, 5, 3, i % 3 == 0, dir_of(i), true);
    const double got = robust_value_iteration(r.imdp, true).value;
    const double ref = oracle::brute_force_optimum(r.imdp, 0, rng);
    ASSERT_NEAR(got, ref, 1e-9) << i;
    EXPECT_NEAR(solve_instance(r.center, r.center.s().objective, nullptr).value, ref, 1e-9);
  }
}

TEST(RobustVi, MatchesBruteForce) {
  std::mt19937_64 rng(23);
  for (int i = 0; i < 100; ++i) {
    auto r = oracle::random_imdp(rng, 4, 2, i % 3 == 0, dir_of(i));
    const auto res = robust_value_iteration(r.imdp, true);
    EXPECT_NEAR(res.value, oracle::brute_force_optimum(r.imdp, 20, rng), 1e-6) << i;
    EXPECT_NEAR(res.value, oracle::brute_force_policy_value(r.imdp, actions_of(res.policy), 20, rng), 1e-6) << i;
  }
}

TEST(RobustVi, SoundAgainstIncludedModels) {
  std::mt19937_64 rng(29);
  for (int i = 0; i < 30; ++i) {
    auto r = oracle::random_imdp(rng, 6, 3, i % 2 == 0, dir_of(i));
    const auto res = robust_value_iteration(r.imdp, true);
    const auto& st = r.imdp.s();
    const auto a = actions_of(res.policy);
    for (int k = 0; k < 200; ++k) {
      const double v = oracle::kernel_value(st, a, oracle::random_included(r.imdp, rng));
      if (st.objective.direction == Direction::Maximize) {
        EXPECT_LE(res.value, v + 1e-9);
      } else {
        EXPECT_GE(res.value, v - 1e-9);
      }
    }
  }
}

TEST(RobustVi, OptimalPolicyReevaluates) {
  std::mt19937_64 rng(31);
  for (int i = 0; i < 100; ++i) {
    auto r = oracle::random_imdp(rng, 6, 3, i % 2 == 0, dir_of(i));
    const auto opt = robust_value_iteration(r.imdp, true);
    EXPECT_TRUE(opt.policy.is_deterministic());
    const auto ev = robust_value_iteration(r.imdp, false, &opt.policy);
    EXPECT_NEAR(ev.value, opt.value, 1e-9);
    EXPECT_LE(opt.residual, 1e-9);
  }
}

TEST(RobustVi, MergeIsMorePessimistic) {
  std::mt19937_64 rng(37);
  for (int i = 0; i < 50; ++i) {
    auto r = oracle::random_imdp(rng, 5, 2, false, Direction::Maximize);
    auto other = r.imdp;
    std::uniform_real_distribution<double> u(0, 1);
    const auto k = oracle::random_included(r.imdp, rng);
    for (std::size_t t = 0; t < other.lo.size(); ++t) {
      other.lo[t] = std::max(1e-3, k[t] - 0.1 * u(rng));
      other.hi[t] = std::min(1.0, k[t] + 0.1 * u(rng));
    }
    const auto pol = Policy::uniform(r.imdp.structure);
    const auto m = merge(r.imdp, other);
    const double vm = robust_value_iteration(m, false, &pol).value;
    EXPECT_LE(vm, std::min(robust_value_iteration(r.imdp, false, &pol).value,
                           robust_value_iteration(other, false, &pol).value) + 1e-9);
  }
}

TEST(RobustVi, MonotoneIterates) {
  std::mt19937_64 rng(41);
  for (int i = 0; i < 30; ++i) {
    auto r = oracle::random_imdp(rng, 6, 3, false, Direction::Maximize);
    std::vector<double> prev;
    bool monotone = true;
    SolverOptions opt;
    opt.on_sweep = [&](std::size_t, std::span<const double> v) {
      if (!prev.empty()) {
        for (std::size_t s = 0; s < v.size(); ++s) monotone &= v[s] >= prev[s] - 1e-15;
      }
      prev.assign(v.begin(), v.end());
    };
    robust_value_iteration(r.imdp, r.imdp.s().objective, true, nullptr, opt);
    EXPECT_TRUE(monotone) << i;
  }
}

TEST(ExactValue, ChainClosedForm) {
  const auto m = build_benchmark("chain");
  const auto& st = m.structure();
  for (double p : {0.3, 0.5, 0.6, 0.85}) {
    const auto inst = instantiate(m, Valuation{{p}});
    std::vector<std::size_t> all_a(st.num_states, 0), all_b(st.num_states, 0);
    for (std::size_t s = 0; s < st.num_states; ++s) {
      if (auto c = st.find_choice(s, "b")) all_b[s] = *c - st.choice_begin[s];
    }
    const double va = exact_policy_value(inst, Policy::deterministic(m.structure_ptr(), all_a));
    const double vb = exact_policy_value(inst, Policy::deterministic(m.structure_ptr(), all_b));
    EXPECT_NEAR(va, oracle::reset_chain_steps(p, 6), 1e-9 * va) << p;
    EXPECT_NEAR(vb, oracle::reset_chain_steps(1 - p, 6), 1e-9 * vb) << p;
  }
}

TEST(ExactValue, ChainDenseSolve) {
  const auto m = build_benchmark("chain");
  const auto& st = m.structure();
  const auto inst = instantiate(m, Valuation{{0.55}});
  const auto pol = Policy::uniform(m.structure_ptr());
  oracle::Matrix P(st.num_states, std::vector<double>(st.num_states, 0.0));
  for (std::size_t c = 0; c < st.num_choices(); ++c) {
    for (std::size_t t = st.trans_begin[c]; t < st.trans_begin[c + 1]; ++t) {
      P[st.choice_state[c]][st.successor[t]] += pol.prob(c) * inst.probs[t];
    }
  }
  const auto v = oracle::expected_reward(P, st.state_reward, st.target_mask());
  EXPECT_NEAR(exact_policy_value(inst, pol), v[0], 1e-6);
}

TEST(ExactValue, TrivialReach) {
  ModelBuilder b(3);
  b.set_initial(0, 1.0);
  b.add_action(0, "a");
  b.add_transition(0, "a", 1, "1");
  b.set_objective({ObjectiveKind::Reach, {1}, {}, Direction::Maximize});
  const auto m = b.build();
  const auto res = solve_instance(instantiate(m, Valuation{}), m.structure().objective, nullptr);
  EXPECT_EQ(res.values[1], 1.0);
  EXPECT_EQ(res.values[2], 0.0);
  EXPECT_EQ(res.values[0], 1.0);
}

TEST(ExpectedReward, ImproperPoliciesRejected) {
  ModelBuilder b(2);
  b.set_initial(0, 1.0);
  b.add_action(0, "go");
  b.add_action(0, "loop");
  b.add_transition(0, "go", 1, "1");
  b.add_transition(0, "loop", 0, "1");
  b.set_state_reward(0, 1.0);
  b.set_objective({ObjectiveKind::ExpectedReward, {1}, {}, Direction::Minimize});
  const auto m = b.build();
  const auto inst = instantiate(m, Valuation{});
  const std::size_t loop[] = {1, 0};
  EXPECT_THROW(exact_policy_value(inst, Policy::deterministic(m.structure_ptr(), loop)), ValidationError);
  const std::size_t go[] = {0, 0};
  EXPECT_DOUBLE_EQ(exact_policy_value(inst, Policy::deterministic(m.structure_ptr(), go)), 1.0);
}

TEST(ExpectedReward, BettingTwoRoundRecursion) {
  BenchmarkSpec spec;
  spec.name = "betting";
  spec.rounds = 2;
  const auto m = build_benchmark(spec);
  for (double p : {0.3, 0.5, 0.9}) {
    // V(r, c) = max over bets b <= c of p V(r+1, c+b) + (1-p) V(r+1, c-b); V(2, c) = c.
    std::function<double(int, int)> V = [&](int r, int c) -> double {
      if (r == 2) return c;
      double best = -1;
      for (int bet : spec.bets) {
        if (bet > c) continue;
        best = std::max(best, bet == 0 ? V(r + 1, c) : p * V(r + 1, c + bet) + (1 - p) * V(r + 1, c - bet));
      }
      return best;
    };
    const auto inst = instantiate(m, Valuation{{p}});
    EXPECT_NEAR(solve_instance(inst, m.structure().objective, nullptr).value, V(0, spec.start_coins), 1e-9) << p;
    // Every policy's expected coins equal the start plus expected net winnings.
    const double uniform = exact_policy_value(inst, Policy::uniform(m.structure_ptr()));
    std::function<double(int, int)> U = [&](int r, int c) -> double {
      if (r == 2) return c;
      double acc = 0;
      int n = 0;
      for (int bet : spec.bets) {
        if (bet > c) continue;
        ++n;
        acc += bet == 0 ? U(r + 1, c) : p * U(r + 1, c + bet) + (1 - p) * U(r + 1, c - bet);
      }
      return acc / n;
    };
    EXPECT_NEAR(uniform, U(0, spec.start_coins), 1e-9);
  }
}
