#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "upmdp/learn.hpp"
#include "upmdp/model.hpp"
#include "upmdp/policy.hpp"

namespace upmdp {

// Pessimistic: nature works against the agent's direction.
enum class Nature { Pessimistic, Optimistic };

struct SolverOptions {
  double tolerance = 1e-9;  // sup-norm residual of value iteration
  std::size_t max_iterations = 100000;
  Nature nature = Nature::Pessimistic;
  // Called after every value-iteration sweep with the current values.
  std::function<void(std::size_t, std::span<const double>)> on_sweep;
};

struct RobustResult {
  std::vector<double> values;  // per state; NaN where the value is undefined
  double value = 0.0;          // expectation under the initial distribution
  Policy policy;               // optimal (optimize) or the evaluated policy
  std::size_t iterations = 0;
  double residual = 0.0;  // Bellman residual of `values`
};

// Transition-wise hull [min lo, max hi] of two interval MDPs over the same
// structure.
IntervalMDP merge(const IntervalMDP& a, const IntervalMDP& b);
IntervalMDP merge_all(std::span<const IntervalMDP> models);

// Distribution in {lo <= P <= hi, sum P = 1} minimising (or maximising)
// sum P * values. Successors are ranked by value, ties by state index.
void worst_case_distribution(std::span<const double> values, std::span<const std::size_t> successors,
                             std::span<const double> lo, std::span<const double> hi, bool minimize,
                             std::span<double> out);

// Robust value of an interval MDP. With `optimize` the agent picks the best
// memoryless deterministic policy; otherwise `policy` is evaluated.
// Expected-reward objectives need the target to be reached almost surely
// from every reachable state; otherwise ValidationError is thrown.
RobustResult robust_value_iteration(const IntervalMDP& imdp, const EvaluationSpec& spec, bool optimize,
                                    const Policy* policy = nullptr, const SolverOptions& options = {});
RobustResult robust_value_iteration(const IntervalMDP& imdp, bool optimize, const Policy* policy = nullptr,
                                    const SolverOptions& options = {});

// Value of a concrete MDP: optimal when `policy` is null, otherwise the
// value of `policy`. Solved exactly by linear algebra.
RobustResult solve_instance(const MDPInstance& instance, const EvaluationSpec& spec, const Policy* policy);
double exact_policy_value(const MDPInstance& instance, const EvaluationSpec& spec, const Policy& policy);
double exact_policy_value(const MDPInstance& instance, const Policy& policy);

}  // namespace upmdp
