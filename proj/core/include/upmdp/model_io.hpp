#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "upmdp/model.hpp"

namespace upmdp {

// JSON model document:
// {
//   "states": 3,
//   "initial": {"0": 1.0},
//   "actions": {"0": ["a", "b"], "1": ["a"]},
//   "parameters": {"p": {"dist": "beta", "a": 5, "b": 5}},
//   "transitions": [{"s": 0, "a": "a", "to": 1, "expr": "p", "tie": "fwd"}, ...],
//   "rewards": {"state": {"0": 1.0}, "action": [{"s": 0, "a": "a", "r": 2.0}]},
//   "objective": {"kind": "reach" | "reach_avoid" | "exp_reward",
//                 "target": [2], "avoid": [], "direction": "max" | "min"}
// }
ParametricMDP parse_model(std::string_view json_text);
std::string serialize_model(const ParametricMDP& pmdp);

ParametricMDP load_model(const std::filesystem::path& path);
void save_model(const ParametricMDP& pmdp, const std::filesystem::path& path);

// Same states, actions, successors, expressions (structurally), tie labels,
// parameters, rewards and objective.
bool structurally_equal(const ParametricMDP& a, const ParametricMDP& b);

std::string objective_kind_name(ObjectiveKind k);
std::string direction_name(Direction d);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace upmdp
