#include "upmdp/graph.hpp"

#include <deque>

namespace upmdp {

namespace {
bool usable(const std::vector<bool>& allowed, std::size_t c) { return allowed.empty() || allowed[c]; }
}  // namespace

std::vector<bool> can_reach(const ModelStructure& st, const std::vector<bool>& allowed,
                            const std::vector<bool>& goal, const std::vector<bool>& blocked) {
  // Backward search over predecessor lists.
  std::vector<std::vector<std::size_t>> pred(st.num_states);
  for (std::size_t c = 0; c < st.num_choices(); ++c) {
    if (!usable(allowed, c)) continue;
    const std::size_t s = st.choice_state[c];
    for (std::size_t t = st.trans_begin[c]; t < st.trans_begin[c + 1]; ++t) pred[st.successor[t]].push_back(s);
  }
  std::vector<bool> seen(st.num_states, false);
  std::deque<std::size_t> queue;
  for (std::size_t s = 0; s < st.num_states; ++s) {
    if (goal[s]) {
      seen[s] = true;
      queue.push_back(s);
    }
  }
  while (!queue.empty()) {
    const std::size_t s = queue.front();
    queue.pop_front();
    for (auto p : pred[s]) {
      if (seen[p] || (!blocked.empty() && blocked[p])) continue;
      seen[p] = true;
      queue.push_back(p);
    }
  }
  return seen;
}

std::vector<bool> can_avoid_forever(const ModelStructure& st, const std::vector<bool>& allowed,
                                    const std::vector<bool>& goal, const std::vector<bool>& sink, bool all_choices) {
  std::vector<bool> in(st.num_states);
  for (std::size_t s = 0; s < st.num_states; ++s) in[s] = !goal[s];
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t s = 0; s < st.num_states; ++s) {
      if (!in[s] || (!sink.empty() && sink[s])) continue;
      bool any = false;
      bool all = true;
      bool some_usable = false;
      for (std::size_t c = st.choice_begin[s]; c < st.choice_begin[s + 1]; ++c) {
        if (!usable(allowed, c)) continue;
        some_usable = true;
        bool stays = true;
        for (std::size_t t = st.trans_begin[c]; t < st.trans_begin[c + 1] && stays; ++t) stays = in[st.successor[t]];
        any = any || stays;
        all = all && stays;
      }
      const bool keep = some_usable && (all_choices ? all : any);
      if (!keep) {
        in[s] = false;
        changed = true;
      }
    }
  }
  return in;
}

std::vector<bool> reachable_from_initial(const ModelStructure& st, const std::vector<bool>& allowed) {
  std::vector<bool> seen(st.num_states, false);
  std::deque<std::size_t> queue;
  for (std::size_t s = 0; s < st.num_states; ++s) {
    if (st.initial[s] > 0.0) {
      seen[s] = true;
      queue.push_back(s);
    }
  }
  while (!queue.empty()) {
    const std::size_t s = queue.front();
    queue.pop_front();
    for (std::size_t c = st.choice_begin[s]; c < st.choice_begin[s + 1]; ++c) {
      if (!usable(allowed, c)) continue;
      for (std::size_t t = st.trans_begin[c]; t < st.trans_begin[c + 1]; ++t) {
        const std::size_t n = st.successor[t];
        if (!seen[n]) {
          seen[n] = true;
          queue.push_back(n);
        }
      }
    }
  }
  return seen;
}

}  // namespace upmdp
