#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "upmdp/model.hpp"

namespace upmdp {

// Memoryless policy: a distribution over the choices of each state, stored
// per choice in the structure's layout.
class Policy {
 public:
  Policy() = default;
  Policy(StructurePtr structure, std::vector<double> choice_probs);

  // Picks the local action index `actions[s]` in every state.
  static Policy deterministic(StructurePtr structure, std::span<const std::size_t> actions);
  static Policy uniform(StructurePtr structure);

  const ModelStructure& structure() const { return *structure_; }
  const StructurePtr& structure_ptr() const { return structure_; }
  double prob(std::size_t choice) const { return probs_[choice]; }
  std::span<const double> probs() const { return probs_; }
  bool is_deterministic() const;
  // Local index of the most likely action (lowest index on ties).
  std::size_t action_index(std::size_t s) const;
  bool empty() const { return structure_ == nullptr; }

 private:
  StructurePtr structure_;
  std::vector<double> probs_;
};

// {"0": "a", "1": {"a": 0.5, "b": 0.5}}; states without an entry fall back
// to their first action.
Policy parse_policy(const StructurePtr& structure, std::string_view json_text);
std::string serialize_policy(const Policy& policy);
Policy load_policy(const StructurePtr& structure, const std::filesystem::path& path);

}  // namespace upmdp
