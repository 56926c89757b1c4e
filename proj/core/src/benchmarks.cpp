#include "upmdp/benchmarks.hpp"

#include <algorithm>
#include <array>
#include <cstdlib>
#include <deque>
#include <map>
#include <sstream>
#include <tuple>

#include "upmdp/error.hpp"

namespace upmdp {

namespace {

// Explicit model under construction. Outcomes that land on the same
// successor are summed into one transition.
class Draft {
 public:
  struct Outcome {
    std::size_t to;
    std::vector<std::string> terms;
  };
  struct Action {
    std::string name;
    std::vector<Outcome> outcomes;
    double reward = 0.0;
  };

  std::size_t add_state() {
    actions_.emplace_back();
    state_reward_.push_back(0.0);
    return actions_.size() - 1;
  }
  std::size_t size() const { return actions_.size(); }

  Action& add_action(std::size_t s, std::string name) {
    actions_[s].push_back({std::move(name), {}, 0.0});
    return actions_[s].back();
  }

  static void add(Action& a, std::size_t to, std::string term) {
    for (auto& o : a.outcomes) {
      if (o.to == to) {
        o.terms.push_back(std::move(term));
        return;
      }
    }
    a.outcomes.push_back({to, {std::move(term)}});
  }

  void set_state_reward(std::size_t s, double r) { state_reward_[s] = r; }

  ParametricMDP finish(const std::vector<std::pair<std::string, Distribution>>& params, std::size_t initial,
                       EvaluationSpec objective, bool tie_parametric) const {
    ModelBuilder b(actions_.size());
    for (const auto& [name, dist] : params) b.add_parameter(name, dist);
    b.set_initial(initial, 1.0);
    for (std::size_t s = 0; s < actions_.size(); ++s) {
      if (state_reward_[s] != 0.0) b.set_state_reward(s, state_reward_[s]);
      for (const auto& a : actions_[s]) {
        b.add_action(s, a.name);
        for (const auto& o : a.outcomes) {
          // A lone successor takes the whole row even when its terms only
          // sum to 1 up to rounding.
          std::string text;
          for (std::size_t i = 0; i < o.terms.size(); ++i) {
            if (i) text += " + ";
            text += o.terms.size() > 1 ? "(" + o.terms[i] + ")" : o.terms[i];
          }
          if (a.outcomes.size() == 1) text = "1";
          Expr e = b.parse(text);
          std::string tie = tie_parametric && !e.is_constant() ? e.to_string() : std::string();
          b.add_transition(s, a.name, o.to, std::move(e), std::move(tie));
        }
        if (a.reward != 0.0) b.set_choice_reward(s, a.name, a.reward);
      }
    }
    b.set_objective(std::move(objective));
    return b.build();
  }

 private:
  std::vector<std::vector<Action>> actions_;
  std::vector<double> state_reward_;
};

Distribution pick(const BenchmarkSpec& spec, const std::string& name, Distribution fallback) {
  auto it = spec.distributions.find(name);
  return it == spec.distributions.end() ? fallback : it->second;
}

void require_positive(int v, const char* what) {
  if (v <= 0) throw ValidationError(std::string("benchmark knob '") + what + "' must be positive");
}

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

// Chain of `chain_length` moves. Action a moves forward with probability p
// and otherwise falls back to the start; action b swaps the two outcomes.
// Every step costs 1; the objective is the expected number of steps.
ParametricMDP build_chain(const BenchmarkSpec& spec) {
  require_positive(spec.chain_length, "chain_length");
  const auto n = static_cast<std::size_t>(spec.chain_length);
  Draft d;
  for (std::size_t s = 0; s <= n; ++s) d.add_state();
  for (std::size_t s = 0; s < n; ++s) {
    d.set_state_reward(s, 1.0);
    auto& a = d.add_action(s, "a");
    Draft::add(a, s + 1, "p");
    Draft::add(a, 0, "1 - p");
    auto& b = d.add_action(s, "b");
    Draft::add(b, s + 1, "1 - p");
    Draft::add(b, 0, "p");
  }
  Draft::add(d.add_action(n, "done"), n, "1");
  EvaluationSpec obj{ObjectiveKind::ExpectedReward, {n}, {}, Direction::Minimize};
  return d.finish({{"p", pick(spec, "p", Distribution::beta(5, 5))}}, 0, obj, true);
}

// Betting game: each round the player bets an amount no larger than the
// current coins and wins the bet with probability p (loses it otherwise).
// After the last round the coins are collected as reward.
ParametricMDP build_betting(const BenchmarkSpec& spec) {
  require_positive(spec.rounds, "rounds");
  require_positive(spec.start_coins, "start_coins");
  if (spec.bets.empty()) throw ValidationError("benchmark knob 'bets' must not be empty");
  for (int b : spec.bets) {
    if (b < 0) throw ValidationError("bets must be non-negative");
  }
  Draft d;
  std::map<std::pair<int, int>, std::size_t> index;  // (round, coins)
  std::map<int, std::size_t> done;                    // coins after collecting
  std::deque<std::pair<int, int>> queue;
  auto state = [&](int r, int c) {
    auto [it, inserted] = index.try_emplace({r, c}, 0);
    if (inserted) {
      it->second = d.add_state();
      queue.emplace_back(r, c);
    }
    return it->second;
  };
  const std::size_t init = state(0, spec.start_coins);
  while (!queue.empty()) {
    const auto [r, c] = queue.front();
    queue.pop_front();
    const std::size_t s = index.at({r, c});
    if (r == spec.rounds) {
      auto [it, inserted] = done.try_emplace(c, 0);
      if (inserted) it->second = d.add_state();
      auto& a = d.add_action(s, "collect");
      a.reward = c;
      Draft::add(a, it->second, "1");
      continue;
    }
    for (int b : spec.bets) {
      if (b > c) continue;
      auto& a = d.add_action(s, "bet" + std::to_string(b));
      if (b == 0) {
        Draft::add(a, state(r + 1, c), "1");
      } else {
        Draft::add(a, state(r + 1, c + b), "p");
        Draft::add(a, state(r + 1, c - b), "1 - p");
      }
    }
  }
  EvaluationSpec obj{ObjectiveKind::ExpectedReward, {}, {}, Direction::Maximize};
  for (const auto& [c, s] : done) {
    Draft::add(d.add_action(s, "stay"), s, "1");
    obj.target.push_back(s);
  }
  return d.finish({{"p", pick(spec, "p", Distribution::beta(20, 2))}}, init, obj, true);
}

// Two aircraft on a width x height grid fly towards each other. Each step
// the agent advances one column and tries to climb, descend or hold its
// altitude; a climb or descent succeeds with probability p and otherwise
// holds. The intruder advances one column the other way and picks climb,
// descend or hold uniformly at random; its manoeuvre succeeds with
// probability q. Sharing a cell, or crossing in the same row, is a crash;
// the agent wins on reaching the last column.
ParametricMDP build_aircraft(const BenchmarkSpec& spec) {
  const int w = spec.width ? spec.width : 10;
  const int h = spec.height ? spec.height : 5;
  require_positive(w - 1, "width - 1");
  require_positive(h, "height");
  Draft d;
  const std::size_t goal = d.add_state();
  const std::size_t crash = d.add_state();
  Draft::add(d.add_action(goal, "stay"), goal, "1");
  Draft::add(d.add_action(crash, "stay"), crash, "1");
  using Key = std::tuple<int, int, int, int>;  // agent x, agent y, intruder x, intruder y
  std::map<Key, std::size_t> index;
  std::deque<Key> queue;
  auto state = [&](const Key& k) {
    auto [it, inserted] = index.try_emplace(k, 0);
    if (inserted) {
      it->second = d.add_state();
      queue.push_back(k);
    }
    return it->second;
  };
  const int mid = h / 2;
  const std::size_t init = state({0, mid, w - 1, mid});

  // Intruder manoeuvre outcomes: (dy, probability term).
  auto intruder_moves = [&](int yb) {
    std::vector<std::pair<int, std::string>> out;
    const bool up = yb + 1 < h;
    const bool down = yb - 1 >= 0;
    if (up) out.emplace_back(1, "q / 3");
    if (down) out.emplace_back(-1, "q / 3");
    const int blocked = (up ? 0 : 1) + (down ? 0 : 1);
    // Hold is chosen with 1/3, failed climbs and descents also hold.
    out.emplace_back(0, blocked == 0 ? "1 - 2 * q / 3" : blocked == 1 ? "1 - q / 3" : "1");
    return out;
  };

  while (!queue.empty()) {
    const auto [xa, ya, xb, yb] = queue.front();
    queue.pop_front();
    const std::size_t s = index.at({xa, ya, xb, yb});
    const std::array<std::pair<const char*, int>, 3> manoeuvres{{{"hold", 0}, {"climb", 1}, {"descend", -1}}};
    for (const auto& [name, dy] : manoeuvres) {
      const int ny = ya + dy;
      if (ny < 0 || ny >= h) continue;
      auto& a = d.add_action(s, name);
      std::vector<std::pair<int, std::string>> agent;
      if (dy == 0) {
        agent.emplace_back(ya, "");
      } else {
        agent.emplace_back(ny, "p");
        agent.emplace_back(ya, "(1 - p)");
      }
      const int nxa = xa + 1;
      const int nxb = xb - 1;
      for (const auto& [ay, aterm] : agent) {
        for (const auto& [dyb, bterm] : intruder_moves(yb)) {
          const int nyb = yb + dyb;
          std::string term = aterm.empty() ? bterm : aterm + " * (" + bterm + ")";
          const bool same_cell = nxa == nxb && ay == nyb;
          const bool crossed = xa < xb && nxa > nxb && ((ay == nyb) || (ya == yb));
          std::size_t to;
          if (same_cell || crossed) {
            to = crash;
          } else if (nxa == w - 1) {
            to = goal;
          } else {
            to = state({nxa, ay, nxb, nyb});
          }
          Draft::add(a, to, term);
        }
      }
    }
  }
  EvaluationSpec obj{ObjectiveKind::ReachAvoid, {goal}, {crash}, Direction::Maximize};
  return d.finish({{"p", pick(spec, "p", Distribution::beta(10, 2))}, {"q", pick(spec, "q", Distribution::beta(2, 10))}},
                  init, obj, true);
}

// An explorer crosses a width x height grid from (0, 0) to the far corner.
// It may move at most `max_silent_moves` times before it must report to the
// controller at (0, 0) over one of two lossy channels. Channel 1 loses a
// message with probability c(x, y) * p, channel 2 with c(x, y) * q, where
// c grows linearly with the Manhattan distance to the controller and is
// kept large enough that losses stay inside [0.05, 0.95]. After
// `max_failed_sends` consecutive losses the mission fails.
ParametricMDP build_semiauto(const BenchmarkSpec& spec) {
  const int w = spec.width ? spec.width : 8;
  const int h = spec.height ? spec.height : 5;
  require_positive(w, "width");
  require_positive(h, "height");
  require_positive(spec.max_silent_moves, "max_silent_moves");
  require_positive(spec.max_failed_sends, "max_failed_sends");
  const Distribution dp = pick(spec, "p", Distribution::uniform(0.75, 0.95));
  const Distribution dq = pick(spec, "q", Distribution::uniform(0.55, 0.85));
  if (dp.support_lo() <= 0.0 || dq.support_lo() <= 0.0 || dp.support_hi() > 0.95 || dq.support_hi() > 0.95) {
    throw ValidationError("semiauto loss parameters must stay inside (0, 0.95]");
  }
  const double floor_coeff = 0.05 / std::min(dp.support_lo(), dq.support_lo());
  const int dmax = (w - 1) + (h - 1);
  auto coeff = [&](int x, int y) {
    const double lin = dmax == 0 ? 1.0 : static_cast<double>(x + y) / dmax;
    return std::max(floor_coeff, lin);
  };

  Draft d;
  const std::size_t fail = d.add_state();
  Draft::add(d.add_action(fail, "stay"), fail, "1");
  using Key = std::tuple<int, int, int, int>;  // x, y, silent moves, failed sends
  std::map<Key, std::size_t> index;
  std::deque<Key> queue;
  std::vector<std::size_t> targets;
  auto state = [&](const Key& k) {
    auto [it, inserted] = index.try_emplace(k, 0);
    if (inserted) {
      it->second = d.add_state();
      queue.push_back(k);
    }
    return it->second;
  };
  const std::size_t init = state({0, 0, 0, 0});
  while (!queue.empty()) {
    const auto [x, y, m, f] = queue.front();
    queue.pop_front();
    const std::size_t s = index.at({x, y, m, f});
    if (x == w - 1 && y == h - 1) {
      Draft::add(d.add_action(s, "stay"), s, "1");
      targets.push_back(s);
      continue;
    }
    if (m < spec.max_silent_moves) {
      const std::array<std::tuple<const char*, int, int>, 4> moves{
          {{"east", 1, 0}, {"north", 0, 1}, {"west", -1, 0}, {"south", 0, -1}}};
      for (const auto& [name, dx, dy] : moves) {
        const int nx = x + dx;
        const int ny = y + dy;
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        Draft::add(d.add_action(s, name), state({nx, ny, m + 1, f}), "1");
      }
    }
    const double c = coeff(x, y);
    for (const auto& [name, param] : {std::pair{"send1", "p"}, std::pair{"send2", "q"}}) {
      auto& a = d.add_action(s, name);
      const std::string loss = num(c) + " * " + param;
      Draft::add(a, state({x, y, 0, 0}), "1 - " + loss);
      const std::size_t lost = f + 1 >= spec.max_failed_sends ? fail : state({x, y, m, f + 1});
      Draft::add(a, lost, loss);
    }
  }
  EvaluationSpec obj{ObjectiveKind::Reach, targets, {}, Direction::Maximize};
  return d.finish({{"p", dp}, {"q", dq}}, init, obj, true);
}

// A drone flies through a width x height x depth grid with obstacles
// towards the far end. In column x the wind displaces it with probability
// p_x to one of the four cells lateral to the intended move (uniformly;
// a displacement off the grid keeps the drone in place). Hitting an
// obstacle is a crash.
ParametricMDP build_uav(const BenchmarkSpec& spec) {
  const int w = spec.width ? spec.width : 16;
  const int h = spec.height ? spec.height : 5;
  const int dz = spec.depth ? spec.depth : 4;
  require_positive(w - 1, "width - 1");
  require_positive(h, "height");
  require_positive(dz, "depth");
  auto obstacle = [&](int x, int y, int z) {
    // Walls every fourth column with a gap that moves with the column.
    if (x == 0 || x == w - 1 || x % 4 != 2) return false;
    const int gap_y = (x / 4) % h;
    return !(y == gap_y || z == dz - 1);
  };
  Draft d;
  const std::size_t crash = d.add_state();
  const std::size_t goal = d.add_state();
  Draft::add(d.add_action(crash, "stay"), crash, "1");
  Draft::add(d.add_action(goal, "stay"), goal, "1");
  using Key = std::tuple<int, int, int>;
  std::map<Key, std::size_t> index;
  std::deque<Key> queue;
  auto cell = [&](int x, int y, int z) -> std::size_t {
    if (obstacle(x, y, z)) return crash;
    if (x == w - 1) return goal;
    auto [it, inserted] = index.try_emplace({x, y, z}, 0);
    if (inserted) {
      it->second = d.add_state();
      queue.emplace_back(x, y, z);
    }
    return it->second;
  };
  auto inside = [&](int x, int y, int z) { return x >= 0 && y >= 0 && z >= 0 && x < w && y < h && z < dz; };
  const std::size_t init = cell(0, h / 2, 0);
  const std::array<std::tuple<const char*, int, int, int>, 6> dirs{{{"east", 1, 0, 0},
                                                                   {"west", -1, 0, 0},
                                                                   {"north", 0, 1, 0},
                                                                   {"south", 0, -1, 0},
                                                                   {"up", 0, 0, 1},
                                                                   {"down", 0, 0, -1}}};
  while (!queue.empty()) {
    const auto [x, y, z] = queue.front();
    queue.pop_front();
    const std::size_t s = index.at({x, y, z});
    const std::string p = "p" + std::to_string(x);
    for (const auto& [name, dx, dy, ddz] : dirs) {
      if (!inside(x + dx, y + dy, z + ddz)) continue;
      auto& a = d.add_action(s, name);
      Draft::add(a, cell(x + dx, y + dy, z + ddz), "1 - " + p);
      for (const auto& [other, ox, oy, oz] : dirs) {
        // Lateral: perpendicular to the intended axis.
        if (std::abs(ox) == std::abs(dx) && std::abs(oy) == std::abs(dy) && std::abs(oz) == std::abs(ddz)) continue;
        (void)other;
        const std::size_t to = inside(x + ox, y + oy, z + oz) ? cell(x + ox, y + oy, z + oz) : s;
        Draft::add(a, to, "0.25 * " + p);
      }
    }
  }
  std::vector<std::pair<std::string, Distribution>> params;
  for (int x = 0; x + 1 < w; ++x) {
    const std::string name = "p" + std::to_string(x);
    params.emplace_back(name, pick(spec, name, Distribution::beta(2, 10)));
  }
  EvaluationSpec obj{ObjectiveKind::ReachAvoid, {goal}, {crash}, Direction::Maximize};
  return d.finish(params, init, obj, true);
}

}  // namespace

std::vector<std::string> benchmark_names() { return {"chain", "betting", "aircraft", "semiauto", "uav"}; }

ParametricMDP build_benchmark(const BenchmarkSpec& spec) {
  if (spec.name == "chain") return build_chain(spec);
  if (spec.name == "betting") return build_betting(spec);
  if (spec.name == "aircraft") return build_aircraft(spec);
  if (spec.name == "semiauto") return build_semiauto(spec);
  if (spec.name == "uav") return build_uav(spec);
  throw ValidationError("unknown benchmark '" + spec.name + "'");
}

ParametricMDP build_benchmark(const std::string& name) {
  BenchmarkSpec spec;
  spec.name = name;
  return build_benchmark(spec);
}

}  // namespace upmdp
