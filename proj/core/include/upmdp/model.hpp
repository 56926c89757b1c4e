#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "upmdp/expr.hpp"

namespace upmdp {

enum class Direction { Maximize, Minimize };
enum class ObjectiveKind { Reach, ReachAvoid, ExpectedReward };

struct EvaluationSpec {
  ObjectiveKind kind = ObjectiveKind::Reach;
  std::vector<std::size_t> target;
  std::vector<std::size_t> avoid;  // only used by ReachAvoid
  Direction direction = Direction::Maximize;
};

// True when `a` is at least as good as `b` under `dir`.
inline bool at_least_as_good(double a, double b, Direction dir) {
  return dir == Direction::Maximize ? a >= b : a <= b;
}

struct Distribution {
  enum class Kind { Beta, Uniform };
  Kind kind = Kind::Uniform;
  double a = 0.0;  // alpha for Beta, lower end for Uniform
  double b = 1.0;  // beta for Beta, upper end for Uniform

  static Distribution beta(double alpha, double beta);
  static Distribution uniform(double lo, double hi);

  double support_lo() const { return kind == Kind::Beta ? 0.0 : a; }
  double support_hi() const { return kind == Kind::Beta ? 1.0 : b; }
  double sample(std::mt19937_64& rng) const;
  void validate(const std::string& name) const;
};

struct Parameter {
  std::string name;
  Distribution dist;
};

class ParameterSpace {
 public:
  std::size_t add(std::string name, Distribution dist);
  std::size_t size() const { return params_.size(); }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  std::optional<std::size_t> find(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;  // throws ValidationError
  const std::vector<Parameter>& all() const { return params_; }

 private:
  std::vector<Parameter> params_;
};

// Parameter values aligned with a ParameterSpace.
struct Valuation {
  std::vector<double> values;

  static Valuation from_map(const ParameterSpace& space, const std::map<std::string, double>& named);
  std::map<std::string, double> to_map(const ParameterSpace& space) const;
};

// Shared state/action/transition skeleton in compressed row layout:
// state s owns choices [choice_begin[s], choice_begin[s+1]), choice c owns
// transitions [trans_begin[c], trans_begin[c+1]).
struct ModelStructure {
  std::size_t num_states = 0;
  std::vector<std::size_t> choice_begin;
  std::vector<std::size_t> choice_state;
  std::vector<std::string> choice_action;
  std::vector<std::size_t> trans_begin;
  std::vector<std::size_t> successor;
  std::vector<std::size_t> trans_choice;
  std::vector<double> initial;        // per state
  std::vector<double> state_reward;   // per state
  std::vector<double> choice_reward;  // per choice
  EvaluationSpec objective;

  std::size_t num_choices() const { return choice_state.size(); }
  std::size_t num_transitions() const { return successor.size(); }
  std::size_t num_actions(std::size_t s) const { return choice_begin[s + 1] - choice_begin[s]; }
  std::size_t choice_of(std::size_t s, std::string_view action) const;  // throws if absent
  std::optional<std::size_t> find_choice(std::size_t s, std::string_view action) const;
  std::optional<std::size_t> find_transition(std::size_t c, std::size_t to) const;
  // Distinct action labels over all states.
  std::size_t num_action_labels() const;
  std::vector<bool> target_mask() const;
  std::vector<bool> avoid_mask() const;
  // A state is absorbing when every choice only loops back to it.
  std::vector<bool> absorbing_mask() const;
};

using StructurePtr = std::shared_ptr<const ModelStructure>;

// Transitions partitioned into tie classes; untied transitions are
// singletons. `class_of[t]` indexes `members`.
struct TiePartition {
  std::vector<std::size_t> class_of;
  std::vector<std::vector<std::size_t>> members;
};

class ParametricMDP {
 public:
  ParametricMDP(StructurePtr structure, ParameterSpace params, std::vector<Expr> exprs,
                std::vector<std::string> ties);

  const ModelStructure& structure() const { return *structure_; }
  const StructurePtr& structure_ptr() const { return structure_; }
  const ParameterSpace& parameters() const { return params_; }
  const Expr& expr(std::size_t t) const { return exprs_[t]; }
  const std::vector<Expr>& exprs() const { return exprs_; }
  const std::string& tie(std::size_t t) const { return ties_[t]; }
  const std::vector<std::string>& ties() const { return ties_; }
  bool is_known(std::size_t t) const { return known_[t]; }

  // Explicit tie labels only (or none when `use_ties` is false).
  TiePartition tie_partition(bool use_ties = true) const;

 private:
  StructurePtr structure_;
  ParameterSpace params_;
  std::vector<Expr> exprs_;
  std::vector<std::string> ties_;
  std::vector<bool> known_;
};

// Concrete MDP obtained by substituting a valuation.
struct MDPInstance {
  StructurePtr structure;
  std::vector<double> probs;  // per transition

  const ModelStructure& s() const { return *structure; }
};

class ModelBuilder {
 public:
  explicit ModelBuilder(std::size_t num_states);

  std::size_t add_parameter(std::string name, Distribution dist);
  const ParameterSpace& parameters() const { return params_; }
  Expr parse(std::string_view text) const;

  void set_initial(std::size_t s, double prob);
  // Declares the action order of a state. Actions of a state must be
  // declared before their transitions are added.
  void add_action(std::size_t s, std::string action);
  bool has_action(std::size_t s, std::string_view action) const;
  void add_transition(std::size_t s, std::string_view action, std::size_t to, Expr expr,
                      std::string tie = {});
  void add_transition(std::size_t s, std::string_view action, std::size_t to, std::string_view expr,
                      std::string tie = {});
  void set_state_reward(std::size_t s, double r);
  void set_choice_reward(std::size_t s, std::string_view action, double r);
  void set_objective(EvaluationSpec spec);

  // States without declared actions receive an action "stay" that loops
  // with probability 1.
  ParametricMDP build() const;

 private:
  struct PendingTransition {
    std::size_t to;
    Expr expr;
    std::string tie;
  };
  struct PendingChoice {
    std::string action;
    std::vector<PendingTransition> transitions;
    double reward = 0.0;
  };

  PendingChoice& pending(std::size_t s, std::string_view action);
  void check_state(std::size_t s, const char* what) const;

  std::size_t num_states_;
  ParameterSpace params_;
  std::vector<double> initial_;
  std::vector<double> state_reward_;
  std::vector<std::vector<PendingChoice>> choices_;
  std::optional<EvaluationSpec> objective_;
};

Valuation sample_valuation(const ParameterSpace& space, std::mt19937_64& rng);

// Throws ValidationError if any entry leaves [0, 1], is zero on the
// parametric support, is not finite, or a row misses 1 by more than 1e-9.
MDPInstance instantiate(const ParametricMDP& pmdp, const Valuation& v);

// True iff `v` lies in the support box of every parameter.
bool in_support(const ParameterSpace& space, const Valuation& v);

struct SupportViolation {
  std::size_t transition = 0;
  std::size_t state = 0;
  std::string action;
  std::size_t successor = 0;
  double min_value = 0.0;
  double max_value = 0.0;
  std::string reason;
};

// Evaluates every transition expression at each probe and reports the
// transitions whose value leaves (0, 1] at some probe.
std::vector<SupportViolation> validate_graph_preservation(const ParametricMDP& pmdp,
                                                          std::span<const Valuation> probes);

// Support-box corners (all of them up to 10 parameters, otherwise 1024
// random corners) plus `interior` random interior points. Beta supports are
// probed at [1e-6, 1 - 1e-6].
std::vector<Valuation> default_probes(const ParameterSpace& space, std::size_t interior,
                                      std::uint64_t seed);

}  // namespace upmdp
