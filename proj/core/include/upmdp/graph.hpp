#pragma once

#include <vector>

#include "upmdp/model.hpp"

namespace upmdp {

// Qualitative analyses on the support graph. `allowed[c]` marks usable
// choices; an empty vector allows all of them.

// States with a path to `goal` that does not pass through `blocked`.
std::vector<bool> can_reach(const ModelStructure& st, const std::vector<bool>& allowed,
                            const std::vector<bool>& goal, const std::vector<bool>& blocked);

// Largest set X disjoint from `goal` such that every state of X has one
// usable choice (or, with `all_choices`, all usable choices) staying in X.
// States in `sink` belong to X unconditionally.
std::vector<bool> can_avoid_forever(const ModelStructure& st, const std::vector<bool>& allowed,
                                    const std::vector<bool>& goal, const std::vector<bool>& sink, bool all_choices);

// States reachable from the support of the initial distribution.
std::vector<bool> reachable_from_initial(const ModelStructure& st, const std::vector<bool>& allowed);

}  // namespace upmdp
