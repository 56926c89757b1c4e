#include "upmdp/model_io.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "upmdp/error.hpp"

namespace upmdp {

using json = nlohmann::ordered_json;

namespace {

std::size_t state_key(const std::string& key, std::size_t n) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(key, &pos);
  } catch (const std::exception&) {
    throw ValidationError("state key '" + key + "' is not an integer");
  }
  if (pos != key.size() || v >= n) throw ValidationError("state key '" + key + "' out of range");
  return static_cast<std::size_t>(v);
}

std::vector<std::size_t> state_list(const json& j, const char* what) {
  if (!j.is_array()) throw ValidationError(std::string("objective ") + what + " must be an array");
  std::vector<std::size_t> out;
  for (const auto& x : j) out.push_back(x.get<std::size_t>());
  return out;
}

ObjectiveKind parse_kind(const std::string& s) {
  if (s == "reach") return ObjectiveKind::Reach;
  if (s == "reach_avoid") return ObjectiveKind::ReachAvoid;
  if (s == "exp_reward") return ObjectiveKind::ExpectedReward;
  throw ValidationError("unknown objective kind '" + s + "'");
}

Direction parse_direction(const std::string& s) {
  if (s == "max") return Direction::Maximize;
  if (s == "min") return Direction::Minimize;
  throw ValidationError("unknown direction '" + s + "'");
}

ParametricMDP from_json(const json& doc) {
  if (!doc.is_object()) throw ValidationError("model document must be a JSON object");
  for (const char* key : {"states", "initial", "transitions", "objective"}) {
    if (!doc.contains(key)) throw ValidationError(std::string("model document misses '") + key + "'");
  }
  const auto n = doc.at("states").get<std::size_t>();
  ModelBuilder b(n);

  if (doc.contains("parameters")) {
    for (const auto& [name, spec] : doc.at("parameters").items()) {
      const auto dist = spec.at("dist").get<std::string>();
      const double a = spec.at("a").get<double>();
      const double bb = spec.at("b").get<double>();
      if (dist == "beta") {
        b.add_parameter(name, Distribution::beta(a, bb));
      } else if (dist == "uniform") {
        b.add_parameter(name, Distribution::uniform(a, bb));
      } else {
        throw ValidationError("parameter '" + name + "': unknown distribution '" + dist + "'");
      }
    }
  }

  for (const auto& [key, p] : doc.at("initial").items()) b.set_initial(state_key(key, n), p.get<double>());

  if (doc.contains("actions")) {
    for (const auto& [key, list] : doc.at("actions").items()) {
      const auto s = state_key(key, n);
      for (const auto& a : list) b.add_action(s, a.get<std::string>());
    }
  }

  for (const auto& t : doc.at("transitions")) {
    const auto s = t.at("s").get<std::size_t>();
    const auto a = t.at("a").get<std::string>();
    const auto to = t.at("to").get<std::size_t>();
    Expr e;
    const auto& ej = t.at("expr");
    if (ej.is_number()) {
      e = Expr::literal(ej.get<double>());
    } else {
      e = b.parse(ej.get<std::string>());
    }
    std::string tie = t.contains("tie") ? t.at("tie").get<std::string>() : std::string();
    b.add_transition(s, a, to, std::move(e), std::move(tie));
  }

  if (doc.contains("rewards")) {
    const auto& r = doc.at("rewards");
    if (r.contains("state")) {
      for (const auto& [key, v] : r.at("state").items()) b.set_state_reward(state_key(key, n), v.get<double>());
    }
    if (r.contains("action")) {
      for (const auto& e : r.at("action")) {
        b.set_choice_reward(e.at("s").get<std::size_t>(), e.at("a").get<std::string>(), e.at("r").get<double>());
      }
    }
  }

  const auto& o = doc.at("objective");
  EvaluationSpec spec;
  spec.kind = parse_kind(o.at("kind").get<std::string>());
  spec.target = state_list(o.at("target"), "target");
  if (o.contains("avoid")) spec.avoid = state_list(o.at("avoid"), "avoid");
  spec.direction = parse_direction(o.value("direction", std::string("max")));
  b.set_objective(std::move(spec));
  return b.build();
}

}  // namespace

std::string objective_kind_name(ObjectiveKind k) {
  switch (k) {
    case ObjectiveKind::Reach:
      return "reach";
    case ObjectiveKind::ReachAvoid:
      return "reach_avoid";
    case ObjectiveKind::ExpectedReward:
      return "exp_reward";
  }
  return "reach";
}

std::string direction_name(Direction d) { return d == Direction::Maximize ? "max" : "min"; }

ParametricMDP parse_model(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("model JSON: ") + e.what(), e.byte);
  }
  try {
    return from_json(doc);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("model JSON: ") + e.what());
  }
}

std::string serialize_model(const ParametricMDP& pmdp) {
  const auto& st = pmdp.structure();
  json doc;
  doc["states"] = st.num_states;
  json init = json::object();
  for (std::size_t s = 0; s < st.num_states; ++s) {
    if (st.initial[s] != 0.0) init[std::to_string(s)] = st.initial[s];
  }
  doc["initial"] = init;
  json params = json::object();
  for (const auto& p : pmdp.parameters().all()) {
    params[p.name] = {{"dist", p.dist.kind == Distribution::Kind::Beta ? "beta" : "uniform"},
                      {"a", p.dist.a},
                      {"b", p.dist.b}};
  }
  doc["parameters"] = params;
  json actions = json::object();
  json transitions = json::array();
  json state_rewards = json::object();
  json action_rewards = json::array();
  for (std::size_t s = 0; s < st.num_states; ++s) {
    json list = json::array();
    for (std::size_t c = st.choice_begin[s]; c < st.choice_begin[s + 1]; ++c) {
      list.push_back(st.choice_action[c]);
      if (st.choice_reward[c] != 0.0) {
        action_rewards.push_back({{"s", s}, {"a", st.choice_action[c]}, {"r", st.choice_reward[c]}});
      }
      for (std::size_t t = st.trans_begin[c]; t < st.trans_begin[c + 1]; ++t) {
        json tj = {{"s", s}, {"a", st.choice_action[c]}, {"to", st.successor[t]}, {"expr", pmdp.expr(t).to_string()}};
        if (!pmdp.tie(t).empty()) tj["tie"] = pmdp.tie(t);
        transitions.push_back(std::move(tj));
      }
    }
    actions[std::to_string(s)] = std::move(list);
    if (st.state_reward[s] != 0.0) state_rewards[std::to_string(s)] = st.state_reward[s];
  }
  doc["actions"] = actions;
  doc["transitions"] = transitions;
  if (!state_rewards.empty() || !action_rewards.empty()) {
    doc["rewards"] = {{"state", state_rewards}, {"action", action_rewards}};
  }
  json obj = {{"kind", objective_kind_name(st.objective.kind)},
              {"target", st.objective.target},
              {"direction", direction_name(st.objective.direction)}};
  if (st.objective.kind == ObjectiveKind::ReachAvoid) obj["avoid"] = st.objective.avoid;
  doc["objective"] = obj;
  return doc.dump(1) + "\n";
}

ParametricMDP load_model(const std::filesystem::path& path) { return parse_model(read_text_file(path)); }

void save_model(const ParametricMDP& pmdp, const std::filesystem::path& path) {
  write_text_file(path, serialize_model(pmdp));
}

bool structurally_equal(const ParametricMDP& a, const ParametricMDP& b) {
  const auto& x = a.structure();
  const auto& y = b.structure();
  if (x.num_states != y.num_states || x.choice_begin != y.choice_begin || x.choice_action != y.choice_action ||
      x.trans_begin != y.trans_begin || x.successor != y.successor || x.initial != y.initial ||
      x.state_reward != y.state_reward || x.choice_reward != y.choice_reward) {
    return false;
  }
  if (x.objective.kind != y.objective.kind || x.objective.direction != y.objective.direction ||
      x.objective.target != y.objective.target || x.objective.avoid != y.objective.avoid) {
    return false;
  }
  if (a.parameters().size() != b.parameters().size()) return false;
  for (std::size_t i = 0; i < a.parameters().size(); ++i) {
    const auto& p = a.parameters()[i];
    const auto& q = b.parameters()[i];
    if (p.name != q.name || p.dist.kind != q.dist.kind || p.dist.a != q.dist.a || p.dist.b != q.dist.b) return false;
  }
  return a.exprs() == b.exprs() && a.ties() == b.ties();
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
}

}  // namespace upmdp
