#include "upmdp/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "upmdp/error.hpp"

namespace upmdp {

Distribution Distribution::beta(double alpha, double beta) {
  Distribution d{Kind::Beta, alpha, beta};
  d.validate("beta");
  return d;
}

Distribution Distribution::uniform(double lo, double hi) {
  Distribution d{Kind::Uniform, lo, hi};
  d.validate("uniform");
  return d;
}

void Distribution::validate(const std::string& name) const {
  if (!std::isfinite(a) || !std::isfinite(b)) throw ValidationError("parameter '" + name + "': non-finite distribution argument");
  if (kind == Kind::Beta) {
    if (a <= 0.0 || b <= 0.0) throw ValidationError("parameter '" + name + "': Beta shape arguments must be positive");
  } else if (!(a < b)) {
    throw ValidationError("parameter '" + name + "': uniform requires a < b");
  }
}

double Distribution::sample(std::mt19937_64& rng) const {
  if (kind == Kind::Uniform) {
    std::uniform_real_distribution<double> u(a, b);
    return u(rng);
  }
  std::gamma_distribution<double> ga(a, 1.0);
  std::gamma_distribution<double> gb(b, 1.0);
  // The support of Beta is open; reject draws that round onto an endpoint.
  for (;;) {
    const double x = ga(rng);
    const double y = gb(rng);
    const double v = x / (x + y);
    if (v > 0.0 && v < 1.0) return v;
  }
}

std::size_t ParameterSpace::add(std::string name, Distribution dist) {
  if (name.empty()) throw ValidationError("parameter name must not be empty");
  if (find(name)) throw ValidationError("duplicate parameter '" + name + "'");
  dist.validate(name);
  params_.push_back({std::move(name), dist});
  return params_.size() - 1;
}

std::optional<std::size_t> ParameterSpace::find(std::string_view name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t ParameterSpace::index_of(std::string_view name) const {
  if (auto i = find(name)) return *i;
  throw ValidationError("unknown parameter '" + std::string(name) + "'");
}

Valuation Valuation::from_map(const ParameterSpace& space, const std::map<std::string, double>& named) {
  Valuation v;
  v.values.resize(space.size());
  for (std::size_t i = 0; i < space.size(); ++i) {
    auto it = named.find(space[i].name);
    if (it == named.end()) throw ValidationError("valuation misses parameter '" + space[i].name + "'");
    v.values[i] = it->second;
  }
  for (const auto& [name, value] : named) {
    if (!space.find(name)) throw ValidationError("valuation names unknown parameter '" + name + "'");
  }
  return v;
}

std::map<std::string, double> Valuation::to_map(const ParameterSpace& space) const {
  std::map<std::string, double> out;
  for (std::size_t i = 0; i < space.size() && i < values.size(); ++i) out[space[i].name] = values[i];
  return out;
}

std::size_t ModelStructure::choice_of(std::size_t s, std::string_view action) const {
  if (auto c = find_choice(s, action)) return *c;
  throw ValidationError("state " + std::to_string(s) + " has no action '" + std::string(action) + "'");
}

std::optional<std::size_t> ModelStructure::find_choice(std::size_t s, std::string_view action) const {
  if (s >= num_states) return std::nullopt;
  for (std::size_t c = choice_begin[s]; c < choice_begin[s + 1]; ++c) {
    if (choice_action[c] == action) return c;
  }
  return std::nullopt;
}

std::optional<std::size_t> ModelStructure::find_transition(std::size_t c, std::size_t to) const {
  for (std::size_t t = trans_begin[c]; t < trans_begin[c + 1]; ++t) {
    if (successor[t] == to) return t;
  }
  return std::nullopt;
}

std::size_t ModelStructure::num_action_labels() const {
  std::set<std::string_view> labels(choice_action.begin(), choice_action.end());
  return labels.size();
}

std::vector<bool> ModelStructure::target_mask() const {
  std::vector<bool> m(num_states, false);
  for (auto s : objective.target) m[s] = true;
  return m;
}

std::vector<bool> ModelStructure::avoid_mask() const {
  std::vector<bool> m(num_states, false);
  if (objective.kind == ObjectiveKind::ReachAvoid) {
    for (auto s : objective.avoid) m[s] = true;
  }
  return m;
}

std::vector<bool> ModelStructure::absorbing_mask() const {
  std::vector<bool> m(num_states, true);
  for (std::size_t c = 0; c < num_choices(); ++c) {
    for (std::size_t t = trans_begin[c]; t < trans_begin[c + 1]; ++t) {
      if (successor[t] != choice_state[c]) m[choice_state[c]] = false;
    }
  }
  return m;
}

ParametricMDP::ParametricMDP(StructurePtr structure, ParameterSpace params, std::vector<Expr> exprs,
                             std::vector<std::string> ties)
    : structure_(std::move(structure)),
      params_(std::move(params)),
      exprs_(std::move(exprs)),
      ties_(std::move(ties)) {
  if (exprs_.size() != structure_->num_transitions() || ties_.size() != exprs_.size()) {
    throw ValidationError("transition annotations do not match the structure");
  }
  known_.resize(exprs_.size());
  for (std::size_t t = 0; t < exprs_.size(); ++t) {
    known_[t] = exprs_[t].is_constant();
    for (auto p : exprs_[t].parameters()) {
      if (p >= params_.size()) throw ValidationError("expression references an undeclared parameter");
    }
  }
}

TiePartition ParametricMDP::tie_partition(bool use_ties) const {
  TiePartition part;
  part.class_of.assign(exprs_.size(), 0);
  std::map<std::string, std::size_t> by_label;
  for (std::size_t t = 0; t < exprs_.size(); ++t) {
    if (use_ties && !ties_[t].empty()) {
      auto [it, inserted] = by_label.try_emplace(ties_[t], part.members.size());
      if (inserted) part.members.emplace_back();
      part.class_of[t] = it->second;
      part.members[it->second].push_back(t);
    } else {
      part.class_of[t] = part.members.size();
      part.members.push_back({t});
    }
  }
  return part;
}

ModelBuilder::ModelBuilder(std::size_t num_states)
    : num_states_(num_states),
      initial_(num_states, 0.0),
      state_reward_(num_states, 0.0),
      choices_(num_states) {
  if (num_states == 0) throw ValidationError("model needs at least one state");
}

std::size_t ModelBuilder::add_parameter(std::string name, Distribution dist) {
  return params_.add(std::move(name), dist);
}

Expr ModelBuilder::parse(std::string_view text) const {
  return parse_expr(text, [this](std::string_view name) { return params_.index_of(name); });
}

void ModelBuilder::check_state(std::size_t s, const char* what) const {
  if (s >= num_states_) {
    throw ValidationError(std::string(what) + ": state " + std::to_string(s) + " out of range");
  }
}

void ModelBuilder::set_initial(std::size_t s, double prob) {
  check_state(s, "initial");
  if (!std::isfinite(prob) || prob < 0.0) throw ValidationError("initial probability must be non-negative");
  initial_[s] = prob;
}

void ModelBuilder::add_action(std::size_t s, std::string action) {
  check_state(s, "action");
  if (action.empty()) throw ValidationError("action name must not be empty");
  if (has_action(s, action)) {
    throw ValidationError("state " + std::to_string(s) + " declares action '" + action + "' twice");
  }
  choices_[s].push_back({std::move(action), {}, 0.0});
}

bool ModelBuilder::has_action(std::size_t s, std::string_view action) const {
  check_state(s, "action");
  return std::any_of(choices_[s].begin(), choices_[s].end(),
                     [&](const PendingChoice& c) { return c.action == action; });
}

ModelBuilder::PendingChoice& ModelBuilder::pending(std::size_t s, std::string_view action) {
  check_state(s, "transition");
  for (auto& c : choices_[s]) {
    if (c.action == action) return c;
  }
  throw ValidationError("state " + std::to_string(s) + " has no declared action '" + std::string(action) + "'");
}

void ModelBuilder::add_transition(std::size_t s, std::string_view action, std::size_t to, Expr expr,
                                  std::string tie) {
  check_state(to, "transition target");
  auto& c = pending(s, action);
  for (const auto& t : c.transitions) {
    if (t.to == to) {
      throw ValidationError("duplicate successor " + std::to_string(to) + " for (" + std::to_string(s) +
                            ", " + std::string(action) + ")");
    }
  }
  c.transitions.push_back({to, std::move(expr), std::move(tie)});
}

void ModelBuilder::add_transition(std::size_t s, std::string_view action, std::size_t to,
                                  std::string_view expr, std::string tie) {
  add_transition(s, action, to, parse(expr), std::move(tie));
}

void ModelBuilder::set_state_reward(std::size_t s, double r) {
  check_state(s, "reward");
  if (!std::isfinite(r)) throw ValidationError("reward must be finite");
  state_reward_[s] = r;
}

void ModelBuilder::set_choice_reward(std::size_t s, std::string_view action, double r) {
  if (!std::isfinite(r)) throw ValidationError("reward must be finite");
  pending(s, action).reward = r;
}

void ModelBuilder::set_objective(EvaluationSpec spec) { objective_ = std::move(spec); }

ParametricMDP ModelBuilder::build() const {
  if (!objective_) throw ValidationError("model has no objective");
  auto st = std::make_shared<ModelStructure>();
  st->num_states = num_states_;
  st->initial = initial_;
  st->state_reward = state_reward_;

  const double init_sum = std::accumulate(initial_.begin(), initial_.end(), 0.0);
  if (std::abs(init_sum - 1.0) > 1e-9) {
    throw ValidationError("initial distribution sums to " + std::to_string(init_sum));
  }

  std::vector<Expr> exprs;
  std::vector<std::string> ties;
  st->choice_begin.push_back(0);
  st->trans_begin.push_back(0);
  for (std::size_t s = 0; s < num_states_; ++s) {
    std::vector<PendingChoice> cs = choices_[s];
    if (cs.empty()) cs.push_back({"stay", {{s, Expr::literal(1.0), {}}}, 0.0});
    for (const auto& c : cs) {
      if (c.transitions.empty()) {
        throw ValidationError("(" + std::to_string(s) + ", " + c.action + ") has no successors");
      }
      const std::size_t ci = st->choice_state.size();
      st->choice_state.push_back(s);
      st->choice_action.push_back(c.action);
      st->choice_reward.push_back(c.reward);
      for (const auto& t : c.transitions) {
        st->successor.push_back(t.to);
        st->trans_choice.push_back(ci);
        exprs.push_back(t.expr);
        ties.push_back(t.tie);
      }
      st->trans_begin.push_back(st->successor.size());
    }
    st->choice_begin.push_back(st->choice_state.size());
  }

  // Tie classes may only join structurally identical expressions.
  std::map<std::string, std::size_t> first_of_tie;
  for (std::size_t t = 0; t < exprs.size(); ++t) {
    if (ties[t].empty()) continue;
    if (exprs[t].is_constant()) {
      throw ValidationError("tie label '" + ties[t] + "' attached to a parameter-free transition");
    }
    auto [it, inserted] = first_of_tie.try_emplace(ties[t], t);
    if (!inserted && exprs[it->second] != exprs[t]) {
      throw ValidationError("tie class '" + ties[t] + "' joins different expressions '" +
                            exprs[it->second].to_string() + "' and '" + exprs[t].to_string() + "'");
    }
  }

  EvaluationSpec obj = *objective_;
  if (obj.target.empty()) throw ValidationError("objective target set is empty");
  auto normalise = [&](std::vector<std::size_t>& v, const char* what) {
    for (auto s : v) check_state(s, what);
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  normalise(obj.target, "target");
  normalise(obj.avoid, "avoid");
  if (obj.kind != ObjectiveKind::ReachAvoid && !obj.avoid.empty()) {
    throw ValidationError("avoid set given for an objective without avoid states");
  }
  for (auto s : obj.avoid) {
    if (std::binary_search(obj.target.begin(), obj.target.end(), s)) {
      throw ValidationError("state " + std::to_string(s) + " is both target and avoid");
    }
  }
  st->objective = std::move(obj);

  return ParametricMDP(std::move(st), params_, std::move(exprs), std::move(ties));
}

Valuation sample_valuation(const ParameterSpace& space, std::mt19937_64& rng) {
  Valuation v;
  v.values.reserve(space.size());
  for (const auto& p : space.all()) v.values.push_back(p.dist.sample(rng));
  return v;
}

bool in_support(const ParameterSpace& space, const Valuation& v) {
  if (v.values.size() != space.size()) return false;
  for (std::size_t i = 0; i < space.size(); ++i) {
    const auto& d = space[i].dist;
    const double x = v.values[i];
    if (!std::isfinite(x)) return false;
    if (d.kind == Distribution::Kind::Beta) {
      if (!(x > 0.0 && x < 1.0)) return false;
    } else if (x < d.a || x > d.b) {
      return false;
    }
  }
  return true;
}

MDPInstance instantiate(const ParametricMDP& pmdp, const Valuation& v) {
  const auto& st = pmdp.structure();
  if (!in_support(pmdp.parameters(), v)) throw ValidationError("valuation lies outside the parameter support");
  MDPInstance inst{pmdp.structure_ptr(), std::vector<double>(st.num_transitions())};
  for (std::size_t c = 0; c < st.num_choices(); ++c) {
    double row = 0.0;
    for (std::size_t t = st.trans_begin[c]; t < st.trans_begin[c + 1]; ++t) {
      const double p = pmdp.expr(t).evaluate(v.values);
      if (!std::isfinite(p) || p <= 0.0 || p > 1.0) {
        std::ostringstream os;
        os << "transition (" << st.choice_state[c] << ", " << st.choice_action[c] << ", " << st.successor[t]
           << ") evaluates to " << p << ", outside (0, 1]";
        throw ValidationError(os.str());
      }
      inst.probs[t] = p;
      row += p;
    }
    if (std::abs(row - 1.0) > 1e-9) {
      std::ostringstream os;
      os << "row (" << st.choice_state[c] << ", " << st.choice_action[c] << ") sums to " << row;
      throw ValidationError(os.str());
    }
  }
  return inst;
}

std::vector<SupportViolation> validate_graph_preservation(const ParametricMDP& pmdp,
                                                          std::span<const Valuation> probes) {
  const auto& st = pmdp.structure();
  std::vector<SupportViolation> out;
  for (std::size_t t = 0; t < st.num_transitions(); ++t) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    bool bad = false;
    bool non_finite = false;
    for (const auto& v : probes) {
      const double p = pmdp.expr(t).evaluate(v.values);
      if (!std::isfinite(p)) {
        non_finite = true;
        bad = true;
        continue;
      }
      lo = std::min(lo, p);
      hi = std::max(hi, p);
      if (p <= 0.0 || p > 1.0) bad = true;
    }
    if (!bad) continue;
    const std::size_t c = st.trans_choice[t];
    std::string reason = non_finite ? "not finite at some probe"
                         : lo <= 0.0 ? "drops to or below zero"
                                     : "exceeds one";
    out.push_back({t, st.choice_state[c], st.choice_action[c], st.successor[t], lo, hi, reason});
  }
  return out;
}

std::vector<Valuation> default_probes(const ParameterSpace& space, std::size_t interior, std::uint64_t seed) {
  const std::size_t n = space.size();
  std::vector<double> lo(n), hi(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& d = space[i].dist;
    lo[i] = d.kind == Distribution::Kind::Beta ? 1e-6 : d.a;
    hi[i] = d.kind == Distribution::Kind::Beta ? 1.0 - 1e-6 : d.b;
  }
  std::mt19937_64 rng(seed);
  std::vector<Valuation> probes;
  if (n <= 10) {
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
      Valuation v;
      for (std::size_t i = 0; i < n; ++i) v.values.push_back((mask >> i) & 1U ? hi[i] : lo[i]);
      probes.push_back(std::move(v));
    }
  } else {
    std::bernoulli_distribution coin(0.5);
    for (int k = 0; k < 1024; ++k) {
      Valuation v;
      for (std::size_t i = 0; i < n; ++i) v.values.push_back(coin(rng) ? hi[i] : lo[i]);
      probes.push_back(std::move(v));
    }
  }
  for (std::size_t k = 0; k < interior; ++k) {
    Valuation v;
    for (std::size_t i = 0; i < n; ++i) {
      std::uniform_real_distribution<double> u(lo[i], hi[i]);
      v.values.push_back(u(rng));
    }
    probes.push_back(std::move(v));
  }
  return probes;
}

}  // namespace upmdp
