#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "upmdp/model.hpp"
#include "upmdp/simulate.hpp"

namespace upmdp {

inline constexpr double kDefaultMu = 1e-6;

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

struct IntervalProvenance {
  std::string method;  // "pac", "lui", "map", "ucrl2", "merge", "exact"
  double gamma = 0.0;  // PAC / UCRL2 confidence budget
  std::size_t n_unknown = 0;
  double mu = kDefaultMu;
};

// Interval MDP over a shared structure; lo/hi are stored per transition.
struct IntervalMDP {
  StructurePtr structure;
  std::vector<double> lo;
  std::vector<double> hi;
  IntervalProvenance provenance;

  const ModelStructure& s() const { return *structure; }
  Interval interval(std::size_t t) const { return {lo[t], hi[t]}; }
  // Every probability of `instance` lies in its interval (with `slack`).
  bool includes(const MDPInstance& instance, double slack = 0.0) const;
  // Throws NumericError naming the (s, a) of the first infeasible row.
  void check_rows() const;

  static IntervalMDP exact(const MDPInstance& instance);
};

// k / H; NaN when H == 0.
double point_estimate(const CountTable& counts, std::size_t t);

// Wilson score interval with continuity correction for k successes in H
// trials, before clamping. Requires H > 0.
Interval wilson_cc_interval(std::int64_t k, std::int64_t h, double z);

struct PacConfig {
  double gamma = 0.1;
  double mu = kDefaultMu;
  bool tying = true;
  double lui_prior_strength = 0.0;  // strength of the [mu, 1] prior of the LUI learner
  double map_alpha = 1.0;            // symmetric Dirichlet concentration
};

// PAC interval MDP: the true instance lies in the result with probability
// at least 1 - gamma.
IntervalMDP learn_pac_imdp(const ParametricMDP& pmdp, const CountTable& counts, const PacConfig& cfg);

// Number of unknown transition classes sharing the confidence budget.
std::size_t count_unknown_classes(const ParametricMDP& pmdp, bool tying);

// Linearly updating intervals. The prior strength n grows by N per update.
struct LuiPrior {
  Interval interval{kDefaultMu, 1.0};
  double strength = 0.0;
};
LuiPrior lui_update(const LuiPrior& prior, std::int64_t k, std::int64_t n);
IntervalMDP learn_lui_imdp(const ParametricMDP& pmdp, const CountTable& counts, const PacConfig& cfg);

// Dirichlet MAP estimate with concentrations alpha over one row.
std::vector<double> map_estimate(const std::vector<double>& alpha, const std::vector<std::int64_t>& k);
IntervalMDP learn_map_imdp(const ParametricMDP& pmdp, const CountTable& counts, const PacConfig& cfg);

// UCRL2 radius sqrt(14 |S| log(2 |A| |T| / gamma) / H).
double ucrl2_radius(std::size_t num_states, std::size_t num_actions, std::size_t num_transitions, double gamma,
                    std::int64_t h);
IntervalMDP learn_ucrl2_imdp(const ParametricMDP& pmdp, const CountTable& counts, const PacConfig& cfg);

enum class Learner { Pac, Lui, Map, Ucrl2 };
Learner parse_learner(std::string_view name);
std::string learner_name(Learner l);
IntervalMDP learn_imdp(Learner l, const ParametricMDP& pmdp, const CountTable& counts, const PacConfig& cfg);

// [{"s":..,"a":..,"to":..,"lo":..,"hi":..}, ...] plus provenance.
std::string serialize_imdp(const IntervalMDP& imdp);
IntervalMDP parse_imdp(const StructurePtr& structure, std::string_view json_text);

}  // namespace upmdp
