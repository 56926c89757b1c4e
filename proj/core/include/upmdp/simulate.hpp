#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <vector>

#include "upmdp/model.hpp"
#include "upmdp/policy.hpp"
#include "upmdp/rng.hpp"

namespace upmdp {

// Transition counts gathered from trajectories.
//   visits[c]   : #(s, a) for choice c
//   outcomes[t] : #(s, a, s') for transition t
//   trials[t]   : sample size behind outcomes[t]; equals visits of the
//                 owning choice unless the table was pooled over tie classes.
struct CountTable {
  std::vector<std::int64_t> visits;
  std::vector<std::int64_t> outcomes;
  std::vector<std::int64_t> trials;
  bool pooled = false;

  static CountTable zeros(const ModelStructure& st);
  void add(const CountTable& other);
  // Raw tables: every choice's outcomes sum to its visits.
  void check(const ModelStructure& st) const;
};

struct BehaviorPolicy {
  enum class Kind { Uniform, Fixed, EpsilonGreedy };
  Kind kind = Kind::Uniform;
  Policy policy;         // Fixed and EpsilonGreedy
  double epsilon = 0.1;  // EpsilonGreedy: probability of a uniform action

  static BehaviorPolicy uniform() { return {}; }
  static BehaviorPolicy fixed(Policy p) { return {Kind::Fixed, std::move(p), 0.0}; }
  static BehaviorPolicy epsilon_greedy(Policy p, double eps) { return {Kind::EpsilonGreedy, std::move(p), eps}; }
};

struct TrajectoryConfig {
  std::size_t trajectories = 1000;
  std::size_t max_length = 200;
  // Stop an episode on entering a target, avoid or absorbing state.
  bool reset_on_terminal = true;
};

// Simulates an instance and accumulates counts; successive run() calls
// continue the same random stream.
class TrajectoryCollector {
 public:
  TrajectoryCollector(const MDPInstance& instance, BehaviorPolicy behavior, std::size_t max_length,
                      bool reset_on_terminal, std::uint64_t seed);

  // Appends `n` episodes. When `dump` is set, each step is written as
  // "s a s'" (a is the local action index) and episodes are separated by an
  // empty line.
  void run(std::size_t n, std::ostream* dump = nullptr);
  const CountTable& counts() const { return counts_; }
  std::size_t episodes() const { return episodes_; }

 private:
  std::size_t pick_choice(std::size_t s);

  const MDPInstance* instance_;
  BehaviorPolicy behavior_;
  std::size_t max_length_;
  bool reset_on_terminal_;
  Rng rng_;
  std::vector<double> cumulative_;  // per transition, within its row
  std::vector<double> initial_cdf_;
  std::vector<bool> terminal_;
  CountTable counts_;
  std::size_t episodes_ = 0;
};

CountTable collect_counts(const MDPInstance& instance, const BehaviorPolicy& behavior, const TrajectoryConfig& cfg,
                          Rng& rng, std::ostream* dump = nullptr);

// Every transition of a tie class carries the class-summed outcomes and
// class-summed trials.
CountTable pool_tied_counts(const CountTable& counts, const TiePartition& partition);

// Writes `n` trajectories to <dir>/trajectories.txt.
void dump_trajectories(const MDPInstance& instance, const BehaviorPolicy& behavior, const TrajectoryConfig& cfg,
                       Rng& rng, const std::filesystem::path& dir);

std::string serialize_counts(const ModelStructure& st, const CountTable& counts);
CountTable parse_counts(const ModelStructure& st, std::string_view json_text);

}  // namespace upmdp
