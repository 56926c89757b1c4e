#include "upmdp/simulate.hpp"

#include <algorithm>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "upmdp/error.hpp"

namespace upmdp {

CountTable CountTable::zeros(const ModelStructure& st) {
  CountTable t;
  t.visits.assign(st.num_choices(), 0);
  t.outcomes.assign(st.num_transitions(), 0);
  t.trials.assign(st.num_transitions(), 0);
  return t;
}

void CountTable::add(const CountTable& other) {
  if (other.visits.size() != visits.size() || other.outcomes.size() != outcomes.size()) {
    throw ValidationError("count tables of different models");
  }
  for (std::size_t i = 0; i < visits.size(); ++i) visits[i] += other.visits[i];
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    outcomes[i] += other.outcomes[i];
    trials[i] += other.trials[i];
  }
}

void CountTable::check(const ModelStructure& st) const {
  if (visits.size() != st.num_choices() || outcomes.size() != st.num_transitions() ||
      trials.size() != st.num_transitions()) {
    throw ValidationError("count table does not match the model");
  }
  for (std::size_t c = 0; c < st.num_choices(); ++c) {
    if (visits[c] < 0) throw ValidationError("negative visit count");
    std::int64_t sum = 0;
    for (std::size_t t = st.trans_begin[c]; t < st.trans_begin[c + 1]; ++t) {
      if (outcomes[t] < 0 || outcomes[t] > trials[t]) throw ValidationError("outcome count exceeds its trials");
      sum += outcomes[t];
      if (!pooled && trials[t] != visits[c]) throw ValidationError("trials differ from visits in a raw table");
    }
    if (!pooled && sum != visits[c]) {
      throw ValidationError("outcomes of choice " + std::to_string(c) + " do not sum to its visits");
    }
  }
}

TrajectoryCollector::TrajectoryCollector(const MDPInstance& instance, BehaviorPolicy behavior,
                                         std::size_t max_length, bool reset_on_terminal, std::uint64_t seed)
    : instance_(&instance),
      behavior_(std::move(behavior)),
      max_length_(max_length),
      reset_on_terminal_(reset_on_terminal),
      rng_(seed) {
  const auto& st = instance.s();
  if (behavior_.kind != BehaviorPolicy::Kind::Uniform && behavior_.policy.empty()) {
    throw ValidationError("behaviour policy missing");
  }
  cumulative_.resize(st.num_transitions());
  for (std::size_t c = 0; c < st.num_choices(); ++c) {
    double acc = 0.0;
    for (std::size_t t = st.trans_begin[c]; t < st.trans_begin[c + 1]; ++t) {
      acc += instance.probs[t];
      cumulative_[t] = acc;
    }
    cumulative_[st.trans_begin[c + 1] - 1] = std::numeric_limits<double>::infinity();
  }
  double acc = 0.0;
  for (double p : st.initial) {
    acc += p;
    initial_cdf_.push_back(acc);
  }
  initial_cdf_.back() = std::numeric_limits<double>::infinity();
  const auto tgt = st.target_mask();
  const auto avd = st.avoid_mask();
  const auto abs = st.absorbing_mask();
  terminal_.resize(st.num_states);
  for (std::size_t s = 0; s < st.num_states; ++s) terminal_[s] = tgt[s] || avd[s] || abs[s];
  counts_ = CountTable::zeros(st);
}

std::size_t TrajectoryCollector::pick_choice(std::size_t s) {
  const auto& st = instance_->s();
  const std::size_t begin = st.choice_begin[s];
  const std::size_t n = st.choice_begin[s + 1] - begin;
  if (n == 1) return begin;
  bool uniform = behavior_.kind == BehaviorPolicy::Kind::Uniform;
  if (behavior_.kind == BehaviorPolicy::Kind::EpsilonGreedy) {
    std::bernoulli_distribution explore(behavior_.epsilon);
    uniform = explore(rng_);
  }
  if (uniform) {
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    return begin + pick(rng_);
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double x = u(rng_);
  double acc = 0.0;
  for (std::size_t c = begin; c < begin + n; ++c) {
    acc += behavior_.policy.prob(c);
    if (x < acc) return c;
  }
  return begin + n - 1;
}

void TrajectoryCollector::run(std::size_t n, std::ostream* dump) {
  const auto& st = instance_->s();
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t e = 0; e < n; ++e) {
    const double x0 = u(rng_);
    std::size_t s = static_cast<std::size_t>(
        std::upper_bound(initial_cdf_.begin(), initial_cdf_.end(), x0) - initial_cdf_.begin());
    for (std::size_t step = 0; step < max_length_; ++step) {
      if (reset_on_terminal_ && terminal_[s]) break;
      const std::size_t c = pick_choice(s);
      const double x = u(rng_);
      std::size_t t = st.trans_begin[c];
      while (x >= cumulative_[t]) ++t;
      ++counts_.visits[c];
      ++counts_.outcomes[t];
      const std::size_t next = st.successor[t];
      if (dump) *dump << s << ' ' << c - st.choice_begin[s] << ' ' << next << '\n';
      s = next;
    }
    if (dump) *dump << '\n';
    ++episodes_;
  }
  for (std::size_t c = 0; c < st.num_choices(); ++c) {
    for (std::size_t t = st.trans_begin[c]; t < st.trans_begin[c + 1]; ++t) counts_.trials[t] = counts_.visits[c];
  }
}

CountTable collect_counts(const MDPInstance& instance, const BehaviorPolicy& behavior, const TrajectoryConfig& cfg,
                          Rng& rng, std::ostream* dump) {
  TrajectoryCollector col(instance, behavior, cfg.max_length, cfg.reset_on_terminal, rng());
  col.run(cfg.trajectories, dump);
  return col.counts();
}

CountTable pool_tied_counts(const CountTable& counts, const TiePartition& partition) {
  CountTable out = counts;
  out.pooled = true;
  for (const auto& members : partition.members) {
    std::int64_t k = 0;
    std::int64_t h = 0;
    for (auto t : members) {
      k += counts.outcomes[t];
      h += counts.trials[t];
    }
    for (auto t : members) {
      out.outcomes[t] = k;
      out.trials[t] = h;
    }
  }
  return out;
}

void dump_trajectories(const MDPInstance& instance, const BehaviorPolicy& behavior, const TrajectoryConfig& cfg,
                       Rng& rng, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "trajectories.txt");
  if (!out) throw Error("cannot write trajectories to '" + dir.string() + "'");
  collect_counts(instance, behavior, cfg, rng, &out);
}

using json = nlohmann::ordered_json;

std::string serialize_counts(const ModelStructure& st, const CountTable& counts) {
  json rows = json::array();
  for (std::size_t c = 0; c < st.num_choices(); ++c) {
    for (std::size_t t = st.trans_begin[c]; t < st.trans_begin[c + 1]; ++t) {
      rows.push_back({{"s", st.choice_state[c]},
                      {"a", st.choice_action[c]},
                      {"to", st.successor[t]},
                      {"count", counts.outcomes[t]},
                      {"visits", counts.visits[c]}});
    }
  }
  json doc = {{"counts", rows}};
  return doc.dump(1) + "\n";
}

CountTable parse_counts(const ModelStructure& st, std::string_view json_text) {
  CountTable out = CountTable::zeros(st);
  try {
    const json doc = json::parse(json_text);
    for (const auto& r : doc.at("counts")) {
      const auto c = st.choice_of(r.at("s").get<std::size_t>(), r.at("a").get<std::string>());
      const auto t = st.find_transition(c, r.at("to").get<std::size_t>());
      if (!t) throw ValidationError("count for a transition outside the support");
      out.outcomes[*t] = r.at("count").get<std::int64_t>();
      out.visits[c] = r.at("visits").get<std::int64_t>();
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("counts JSON: ") + e.what());
  }
  for (std::size_t c = 0; c < st.num_choices(); ++c) {
    for (std::size_t t = st.trans_begin[c]; t < st.trans_begin[c + 1]; ++t) out.trials[t] = out.visits[c];
  }
  out.check(st);
  return out;
}

}  // namespace upmdp
