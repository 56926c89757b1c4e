#include "upmdp/policy.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "upmdp/error.hpp"
#include "upmdp/model_io.hpp"

namespace upmdp {

using json = nlohmann::ordered_json;

Policy::Policy(StructurePtr structure, std::vector<double> choice_probs)
    : structure_(std::move(structure)), probs_(std::move(choice_probs)) {
  const auto& st = *structure_;
  if (probs_.size() != st.num_choices()) throw ValidationError("policy does not match the model");
  for (std::size_t s = 0; s < st.num_states; ++s) {
    double sum = 0.0;
    for (std::size_t c = st.choice_begin[s]; c < st.choice_begin[s + 1]; ++c) {
      if (!std::isfinite(probs_[c]) || probs_[c] < 0.0) throw ValidationError("policy probability out of range");
      sum += probs_[c];
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw ValidationError("policy distribution of state " + std::to_string(s) + " sums to " + std::to_string(sum));
    }
  }
}

Policy Policy::deterministic(StructurePtr structure, std::span<const std::size_t> actions) {
  const auto& st = *structure;
  if (actions.size() != st.num_states) throw ValidationError("policy needs one action per state");
  std::vector<double> p(st.num_choices(), 0.0);
  for (std::size_t s = 0; s < st.num_states; ++s) {
    if (actions[s] >= st.num_actions(s)) throw ValidationError("policy action index out of range");
    p[st.choice_begin[s] + actions[s]] = 1.0;
  }
  return Policy(std::move(structure), std::move(p));
}

Policy Policy::uniform(StructurePtr structure) {
  const auto& st = *structure;
  std::vector<double> p(st.num_choices());
  for (std::size_t s = 0; s < st.num_states; ++s) {
    for (std::size_t c = st.choice_begin[s]; c < st.choice_begin[s + 1]; ++c) {
      p[c] = 1.0 / static_cast<double>(st.num_actions(s));
    }
  }
  return Policy(std::move(structure), std::move(p));
}

bool Policy::is_deterministic() const {
  for (double p : probs_) {
    if (p != 0.0 && p != 1.0) return false;
  }
  return true;
}

std::size_t Policy::action_index(std::size_t s) const {
  const auto& st = *structure_;
  std::size_t best = 0;
  for (std::size_t c = st.choice_begin[s]; c < st.choice_begin[s + 1]; ++c) {
    if (probs_[c] > probs_[st.choice_begin[s] + best]) best = c - st.choice_begin[s];
  }
  return best;
}

Policy parse_policy(const StructurePtr& structure, std::string_view json_text) {
  const auto& st = *structure;
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("policy JSON: ") + e.what(), e.byte);
  }
  if (!doc.is_object()) throw ValidationError("policy document must be a JSON object");
  std::vector<double> p(st.num_choices(), 0.0);
  std::vector<bool> seen(st.num_states, false);
  try {
    for (const auto& [key, value] : doc.items()) {
      std::size_t pos = 0;
      const auto s = static_cast<std::size_t>(std::stoull(key, &pos));
      if (pos != key.size() || s >= st.num_states) throw ValidationError("policy state '" + key + "' out of range");
      seen[s] = true;
      if (value.is_string()) {
        p[st.choice_of(s, value.get<std::string>())] = 1.0;
      } else if (value.is_object()) {
        for (const auto& [a, q] : value.items()) p[st.choice_of(s, a)] = q.get<double>();
      } else {
        throw ValidationError("policy entry of state '" + key + "' must be an action or a distribution");
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("policy JSON: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw ValidationError("policy state keys must be integers");
  }
  for (std::size_t s = 0; s < st.num_states; ++s) {
    if (!seen[s]) p[st.choice_begin[s]] = 1.0;
  }
  return Policy(structure, std::move(p));
}

std::string serialize_policy(const Policy& policy) {
  const auto& st = policy.structure();
  json doc = json::object();
  for (std::size_t s = 0; s < st.num_states; ++s) {
    bool det = false;
    for (std::size_t c = st.choice_begin[s]; c < st.choice_begin[s + 1]; ++c) {
      if (policy.prob(c) == 1.0) {
        doc[std::to_string(s)] = st.choice_action[c];
        det = true;
      }
    }
    if (det) continue;
    json dist = json::object();
    for (std::size_t c = st.choice_begin[s]; c < st.choice_begin[s + 1]; ++c) {
      if (policy.prob(c) > 0.0) dist[st.choice_action[c]] = policy.prob(c);
    }
    doc[std::to_string(s)] = dist;
  }
  return doc.dump(1) + "\n";
}

Policy load_policy(const StructurePtr& structure, const std::filesystem::path& path) {
  return parse_policy(structure, read_text_file(path));
}

}  // namespace upmdp
