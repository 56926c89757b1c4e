#include "upmdp/imdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "upmdp/error.hpp"
#include "upmdp/graph.hpp"

namespace upmdp {

IntervalMDP merge(const IntervalMDP& a, const IntervalMDP& b) {
  if (a.structure != b.structure && (a.lo.size() != b.lo.size() || a.s().successor != b.s().successor ||
                                     a.s().trans_begin != b.s().trans_begin)) {
    throw ValidationError("merge needs interval MDPs over the same structure");
  }
  IntervalMDP out = a;
  for (std::size_t t = 0; t < out.lo.size(); ++t) {
    out.lo[t] = std::min(a.lo[t], b.lo[t]);
    out.hi[t] = std::max(a.hi[t], b.hi[t]);
  }
  out.provenance.method = "merge";
  return out;
}

IntervalMDP merge_all(std::span<const IntervalMDP> models) {
  if (models.empty()) throw ValidationError("merge of an empty set");
  IntervalMDP out = models.front();
  for (std::size_t i = 1; i < models.size(); ++i) out = merge(out, models[i]);
  out.provenance.method = "merge";
  return out;
}

void worst_case_distribution(std::span<const double> values, std::span<const std::size_t> successors,
                             std::span<const double> lo, std::span<const double> hi, bool minimize,
                             std::span<double> out) {
  const std::size_t m = values.size();
  thread_local std::vector<std::size_t> order;
  order.resize(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    if (values[i] != values[j]) return minimize ? values[i] < values[j] : values[i] > values[j];
    return successors[i] < successors[j];
  });
  double remaining = 1.0;
  for (std::size_t i = 0; i < m; ++i) {
    out[i] = lo[i];
    remaining -= lo[i];
  }
  for (std::size_t k = 0; k < m && remaining > 0.0; ++k) {
    const std::size_t i = order[k];
    const double add = std::min(hi[i] - lo[i], remaining);
    out[i] += add;
    remaining -= add;
  }
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Problem {
  const IntervalMDP& m;
  const ModelStructure& st;
  EvaluationSpec spec;
  bool agent_max;
  bool nature_min;
  std::vector<bool> target;
  std::vector<bool> avoid;
  bool reward;

  Problem(const IntervalMDP& imdp, const EvaluationSpec& e, Nature nature)
      : m(imdp), st(imdp.s()), spec(e), agent_max(e.direction == Direction::Maximize) {
    nature_min = nature == Nature::Pessimistic ? agent_max : !agent_max;
    target.assign(st.num_states, false);
    avoid.assign(st.num_states, false);
    for (auto s : spec.target) {
      if (s >= st.num_states) throw ValidationError("target state out of range");
      target[s] = true;
    }
    if (spec.kind == ObjectiveKind::ReachAvoid) {
      for (auto s : spec.avoid) {
        if (s >= st.num_states) throw ValidationError("avoid state out of range");
        avoid[s] = true;
      }
    }
    reward = spec.kind == ObjectiveKind::ExpectedReward;
  }

  // Nature's choice for choice c against `v`, written into `dist` (per transition).
  void nature_choice(std::size_t c, const std::vector<double>& v, std::vector<double>& dist) const {
    const std::size_t b = st.trans_begin[c];
    const std::size_t n = st.trans_begin[c + 1] - b;
    thread_local std::vector<double> vals;
    vals.resize(n);
    for (std::size_t i = 0; i < n; ++i) vals[i] = v[st.successor[b + i]];
    worst_case_distribution(vals, std::span(st.successor).subspan(b, n), std::span(m.lo).subspan(b, n),
                            std::span(m.hi).subspan(b, n), nature_min, std::span(dist).subspan(b, n));
  }

  double choice_reward(std::size_t c) const {
    return reward ? st.state_reward[st.choice_state[c]] + st.choice_reward[c] : 0.0;
  }

  // Robust Q value of choice c given values v.
  double q_value(std::size_t c, const std::vector<double>& v, std::vector<double>& scratch) const {
    nature_choice(c, v, scratch);
    double acc = choice_reward(c);
    for (std::size_t t = st.trans_begin[c]; t < st.trans_begin[c + 1]; ++t) acc += scratch[t] * v[st.successor[t]];
    return acc;
  }

  bool better(double a, double b) const { return agent_max ? a > b : a < b; }
};

double initial_value(const ModelStructure& st, const std::vector<double>& v) {
  double acc = 0.0;
  for (std::size_t s = 0; s < st.num_states; ++s) {
    if (st.initial[s] > 0.0) acc += st.initial[s] * v[s];
  }
  return acc;
}

double scale(double x) { return std::max(1.0, std::abs(x)); }

// States whose value is fixed regardless of the transition probabilities,
// for policy-restricted choices `allowed` (empty = all choices).
struct Classification {
  std::vector<bool> fixed;
  std::vector<double> fixed_value;
};

Classification classify(const Problem& pb, const std::vector<bool>& allowed, bool fixed_policy) {
  const auto& st = pb.st;
  Classification cl{std::vector<bool>(st.num_states, false), std::vector<double>(st.num_states, 0.0)};
  if (!pb.reward) {
    std::vector<bool> zero;
    if (fixed_policy || pb.agent_max) {
      const auto reach = can_reach(st, allowed, pb.target, pb.avoid);
      zero.resize(st.num_states);
      for (std::size_t s = 0; s < st.num_states; ++s) zero[s] = !reach[s];
    } else {
      zero = can_avoid_forever(st, allowed, pb.target, pb.avoid, false);
    }
    for (std::size_t s = 0; s < st.num_states; ++s) {
      if (pb.target[s]) {
        cl.fixed[s] = true;
        cl.fixed_value[s] = 1.0;
      } else if (pb.avoid[s] || zero[s]) {
        cl.fixed[s] = true;
        cl.fixed_value[s] = 0.0;
      }
    }
    return cl;
  }
  // Expected reward: the target must be reached almost surely under every
  // policy (or under the fixed policy) from every reachable state.
  const auto trap = can_avoid_forever(st, allowed, pb.target, {}, fixed_policy);
  auto improper = can_reach(st, allowed, trap, pb.target);
  const auto relevant = reachable_from_initial(st, allowed);
  for (std::size_t s = 0; s < st.num_states; ++s) {
    if (pb.target[s]) {
      cl.fixed[s] = true;
      cl.fixed_value[s] = 0.0;
    } else if (improper[s]) {
      if (relevant[s]) {
        throw ValidationError("state " + std::to_string(s) +
                              " does not reach the target almost surely; expected reward is undefined");
      }
      cl.fixed[s] = true;
      cl.fixed_value[s] = kNaN;
    }
  }
  return cl;
}

std::vector<bool> allowed_choices(const Policy& p) {
  std::vector<bool> a(p.probs().size());
  for (std::size_t c = 0; c < a.size(); ++c) a[c] = p.prob(c) > 0.0;
  return a;
}

// Exact robust value of a fixed policy: policy iteration for nature with
// sparse LU solves.
std::vector<double> evaluate_policy(const Problem& pb, const Policy& policy, std::vector<double> v,
                                    std::size_t& iterations) {
  const auto& st = pb.st;
  const auto allowed = allowed_choices(policy);
  const auto cl = classify(pb, allowed, true);

  std::vector<std::ptrdiff_t> index(st.num_states, -1);
  std::vector<std::size_t> unknown;
  for (std::size_t s = 0; s < st.num_states; ++s) {
    if (cl.fixed[s]) {
      v[s] = cl.fixed_value[s];
    } else {
      index[s] = static_cast<std::ptrdiff_t>(unknown.size());
      unknown.push_back(s);
      if (!std::isfinite(v[s])) v[s] = 0.0;
    }
  }
  if (unknown.empty()) return v;

  // Values used to rank successors; NaN (undefined) states never occur as
  // successors of unknown states.
  std::vector<double> dist(st.num_transitions(), 0.0);
  std::vector<double> prev_dist;
  const auto n = static_cast<Eigen::Index>(unknown.size());
  for (std::size_t it = 0; it < 10000; ++it) {
    ++iterations;
    for (std::size_t c = 0; c < st.num_choices(); ++c) {
      if (!allowed[c] || cl.fixed[st.choice_state[c]]) continue;
      pb.nature_choice(c, v, dist);
      if (it == 0) continue;
      // Nature only switches on strict improvement, so rounding noise in
      // tied values cannot make it cycle.
      double now = 0.0, before = 0.0;
      for (std::size_t t = st.trans_begin[c]; t < st.trans_begin[c + 1]; ++t) {
        now += dist[t] * v[st.successor[t]];
        before += prev_dist[t] * v[st.successor[t]];
      }
      const bool improves = pb.nature_min ? now < before : now > before;
      if (!improves || std::abs(now - before) <= 1e-14 * scale(before)) {
        std::copy(prev_dist.begin() + static_cast<std::ptrdiff_t>(st.trans_begin[c]),
                  prev_dist.begin() + static_cast<std::ptrdiff_t>(st.trans_begin[c + 1]),
                  dist.begin() + static_cast<std::ptrdiff_t>(st.trans_begin[c]));
      }
    }
    if (it > 0 && dist == prev_dist) break;

    std::vector<Eigen::Triplet<double>> trip;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    for (std::size_t i = 0; i < unknown.size(); ++i) {
      const std::size_t s = unknown[i];
      trip.emplace_back(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i), 1.0);
      for (std::size_t c = st.choice_begin[s]; c < st.choice_begin[s + 1]; ++c) {
        const double pa = policy.prob(c);
        if (pa == 0.0) continue;
        rhs[static_cast<Eigen::Index>(i)] += pa * pb.choice_reward(c);
        for (std::size_t t = st.trans_begin[c]; t < st.trans_begin[c + 1]; ++t) {
          const std::size_t to = st.successor[t];
          const double w = pa * dist[t];
          if (index[to] >= 0) {
            trip.emplace_back(static_cast<Eigen::Index>(i), index[to], -w);
          } else {
            rhs[static_cast<Eigen::Index>(i)] += w * v[to];
          }
        }
      }
    }
    Eigen::SparseMatrix<double> a(n, n);
    a.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success) throw NumericError("policy evaluation: singular linear system");
    const Eigen::VectorXd x = lu.solve(rhs);
    if (lu.info() != Eigen::Success) throw NumericError("policy evaluation: linear solve failed");
    double change = 0.0;
    for (std::size_t i = 0; i < unknown.size(); ++i) {
      const double nv = x[static_cast<Eigen::Index>(i)];
      if (!std::isfinite(nv)) throw NumericError("policy evaluation produced a non-finite value");
      change = std::max(change, std::abs(nv - v[unknown[i]]) / scale(nv));
      v[unknown[i]] = nv;
    }
    prev_dist = dist;
    if (it > 0 && change <= 1e-15) break;
    if (it + 1 == 10000) throw NumericError("nature policy iteration did not terminate");
  }
  return v;
}

double bellman_residual(const Problem& pb, const std::vector<double>& v, const Policy* policy) {
  const auto& st = pb.st;
  std::vector<double> scratch(st.num_transitions());
  double res = 0.0;
  for (std::size_t s = 0; s < st.num_states; ++s) {
    if (!std::isfinite(v[s]) || pb.target[s] || pb.avoid[s]) continue;
    double best = pb.agent_max ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
    double mixed = 0.0;
    for (std::size_t c = st.choice_begin[s]; c < st.choice_begin[s + 1]; ++c) {
      if (policy && policy->prob(c) == 0.0) continue;
      bool finite = true;
      for (std::size_t t = st.trans_begin[c]; t < st.trans_begin[c + 1]; ++t) finite = finite && std::isfinite(v[st.successor[t]]);
      if (!finite) continue;
      const double q = pb.q_value(c, v, scratch);
      if (policy) {
        mixed += policy->prob(c) * q;
      } else if (pb.better(q, best)) {
        best = q;
      }
    }
    const double tv = policy ? mixed : best;
    if (std::isfinite(tv)) res = std::max(res, std::abs(tv - v[s]));
  }
  return res;
}

// Gauss-Seidel robust value iteration for reachability objectives.
std::vector<double> reach_value_iteration(const Problem& pb, const Classification& cl, const SolverOptions& opt,
                                          std::size_t& iterations) {
  const auto& st = pb.st;
  std::vector<double> v(st.num_states, 0.0);
  for (std::size_t s = 0; s < st.num_states; ++s) {
    if (cl.fixed[s]) v[s] = cl.fixed_value[s];
  }
  std::vector<double> scratch(st.num_transitions());
  double residual = std::numeric_limits<double>::infinity();
  for (std::size_t it = 0; it < opt.max_iterations; ++it) {
    residual = 0.0;
    for (std::size_t s = 0; s < st.num_states; ++s) {
      if (cl.fixed[s]) continue;
      double best = pb.agent_max ? -1.0 : 2.0;
      for (std::size_t c = st.choice_begin[s]; c < st.choice_begin[s + 1]; ++c) {
        const double q = pb.q_value(c, v, scratch);
        if (pb.better(q, best)) best = q;
      }
      residual = std::max(residual, std::abs(best - v[s]));
      v[s] = best;
    }
    iterations = it + 1;
    if (opt.on_sweep) opt.on_sweep(iterations, v);
    if (residual <= opt.tolerance) return v;
  }
  std::ostringstream os;
  os << "robust value iteration did not converge in " << opt.max_iterations << " sweeps (residual " << residual
     << ")";
  throw NumericError(os.str());
}

// Deterministic policy greedy in v. For maximised reachability, actions are
// chosen so that every state with positive value makes progress towards the
// target (otherwise a tie could select a self-loop).
Policy extract_policy(const Problem& pb, const Classification& cl, const std::vector<double>& v) {
  const auto& st = pb.st;
  std::vector<double> scratch(st.num_transitions());
  std::vector<double> q(st.num_choices(), 0.0);
  std::vector<std::size_t> action(st.num_states, 0);
  std::vector<bool> optimal(st.num_choices(), false);
  for (std::size_t s = 0; s < st.num_states; ++s) {
    if (cl.fixed[s]) continue;
    double best = pb.agent_max ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
    for (std::size_t c = st.choice_begin[s]; c < st.choice_begin[s + 1]; ++c) {
      q[c] = pb.q_value(c, v, scratch);
      if (pb.better(q[c], best)) best = q[c];
    }
    const double tol = 1e-9 * scale(best);
    bool chosen = false;
    for (std::size_t c = st.choice_begin[s]; c < st.choice_begin[s + 1]; ++c) {
      optimal[c] = std::abs(q[c] - best) <= tol;
      if (optimal[c] && !chosen) {
        action[s] = c - st.choice_begin[s];
        chosen = true;
      }
    }
  }
  if (!pb.reward && !pb.agent_max) {
    // Value-zero states must pick a choice that keeps avoiding the target.
    const auto trap = can_avoid_forever(st, {}, pb.target, pb.avoid, false);
    for (std::size_t s = 0; s < st.num_states; ++s) {
      if (!trap[s] || pb.avoid[s]) continue;
      for (std::size_t c = st.choice_begin[s]; c < st.choice_begin[s + 1]; ++c) {
        bool stays = true;
        for (std::size_t t = st.trans_begin[c]; t < st.trans_begin[c + 1]; ++t) stays = stays && trap[st.successor[t]];
        if (stays) {
          action[s] = c - st.choice_begin[s];
          break;
        }
      }
    }
  }
  if (!pb.reward && pb.agent_max) {
    std::vector<bool> done(st.num_states, false);
    for (std::size_t s = 0; s < st.num_states; ++s) done[s] = pb.target[s];
    bool changed = true;
    while (changed) {
      changed = false;
      for (std::size_t s = 0; s < st.num_states; ++s) {
        if (done[s] || cl.fixed[s] || v[s] <= 0.0) continue;
        for (std::size_t c = st.choice_begin[s]; c < st.choice_begin[s + 1]; ++c) {
          if (!optimal[c]) continue;
          bool progress = false;
          for (std::size_t t = st.trans_begin[c]; t < st.trans_begin[c + 1]; ++t) progress = progress || done[st.successor[t]];
          if (progress) {
            action[s] = c - st.choice_begin[s];
            done[s] = true;
            changed = true;
            break;
          }
        }
      }
    }
  }
  return Policy::deterministic(pb.m.structure, action);
}

// Agent policy iteration on exact robust evaluations. Switches only on
// strict improvement; ties keep the lowest action index.
RobustResult improve_policy(const Problem& pb, const Classification& cl, Policy policy, std::size_t& iterations) {
  const auto& st = pb.st;
  std::vector<double> v(st.num_states, 0.0);
  std::vector<double> scratch(st.num_transitions());
  for (std::size_t round = 0; round < 10000; ++round) {
    v = evaluate_policy(pb, policy, v, iterations);
    std::vector<std::size_t> action(st.num_states);
    bool switched = false;
    for (std::size_t s = 0; s < st.num_states; ++s) {
      action[s] = policy.action_index(s);
      if (cl.fixed[s]) continue;
      const std::size_t cur = st.choice_begin[s] + action[s];
      const double qcur = pb.q_value(cur, v, scratch);
      double best = qcur;
      std::size_t best_c = cur;
      for (std::size_t c = st.choice_begin[s]; c < st.choice_begin[s + 1]; ++c) {
        const double qc = pb.q_value(c, v, scratch);
        if (pb.better(qc, best)) {
          best = qc;
          best_c = c;
        }
      }
      if (best_c != cur && std::abs(best - qcur) > 1e-12 * scale(qcur)) {
        // Lowest index among the actions attaining the improvement.
        for (std::size_t c = st.choice_begin[s]; c < st.choice_begin[s + 1]; ++c) {
          if (std::abs(pb.q_value(c, v, scratch) - best) <= 1e-12 * scale(best)) {
            best_c = c;
            break;
          }
        }
        action[s] = best_c - st.choice_begin[s];
        switched = true;
      }
    }
    if (!switched) {
      RobustResult r;
      r.values = std::move(v);
      r.policy = std::move(policy);
      return r;
    }
    policy = Policy::deterministic(policy.structure_ptr(), action);
  }
  throw NumericError("policy iteration did not terminate");
}

Policy rebind(const Policy& p, const StructurePtr& st) {
  if (p.structure_ptr() == st) return p;
  if (p.probs().size() != st->num_choices()) throw ValidationError("policy does not match the model");
  return Policy(st, std::vector<double>(p.probs().begin(), p.probs().end()));
}

}  // namespace

RobustResult robust_value_iteration(const IntervalMDP& imdp, const EvaluationSpec& spec, bool optimize,
                                    const Policy* policy, const SolverOptions& options) {
  imdp.check_rows();
  const Problem pb(imdp, spec, options.nature);
  const auto& st = imdp.s();
  RobustResult result;
  std::size_t iterations = 0;
  if (!optimize) {
    if (!policy) throw ValidationError("policy evaluation needs a policy");
    Policy p = rebind(*policy, imdp.structure);
    result.values = evaluate_policy(pb, p, std::vector<double>(st.num_states, 0.0), iterations);
    result.residual = bellman_residual(pb, result.values, &p);
    result.policy = std::move(p);
  } else {
    const auto cl = classify(pb, {}, false);
    Policy start;
    if (pb.reward) {
      std::vector<std::size_t> first(st.num_states, 0);
      start = Policy::deterministic(imdp.structure, first);
    } else {
      const auto v = reach_value_iteration(pb, cl, options, iterations);
      start = rebind(extract_policy(pb, cl, v), imdp.structure);
    }
    result = improve_policy(pb, cl, std::move(start), iterations);
    result.residual = bellman_residual(pb, result.values, nullptr);
  }
  result.iterations = iterations;
  result.value = initial_value(st, result.values);
  return result;
}

RobustResult robust_value_iteration(const IntervalMDP& imdp, bool optimize, const Policy* policy,
                                    const SolverOptions& options) {
  return robust_value_iteration(imdp, imdp.s().objective, optimize, policy, options);
}

RobustResult solve_instance(const MDPInstance& instance, const EvaluationSpec& spec, const Policy* policy) {
  const IntervalMDP exact = IntervalMDP::exact(instance);
  return robust_value_iteration(exact, spec, policy == nullptr, policy);
}

double exact_policy_value(const MDPInstance& instance, const EvaluationSpec& spec, const Policy& policy) {
  return solve_instance(instance, spec, &policy).value;
}

double exact_policy_value(const MDPInstance& instance, const Policy& policy) {
  return exact_policy_value(instance, instance.s().objective, policy);
}

}  // namespace upmdp
