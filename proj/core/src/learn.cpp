#include "upmdp/learn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "upmdp/error.hpp"
#include "upmdp/special.hpp"

namespace upmdp {

bool IntervalMDP::includes(const MDPInstance& instance, double slack) const {
  if (instance.probs.size() != lo.size()) return false;
  for (std::size_t t = 0; t < lo.size(); ++t) {
    if (instance.probs[t] < lo[t] - slack || instance.probs[t] > hi[t] + slack) return false;
  }
  return true;
}

void IntervalMDP::check_rows() const {
  const auto& st = s();
  if (lo.size() != st.num_transitions() || hi.size() != st.num_transitions()) {
    throw ValidationError("interval MDP does not match its structure");
  }
  for (std::size_t c = 0; c < st.num_choices(); ++c) {
    double slo = 0.0;
    double shi = 0.0;
    for (std::size_t t = st.trans_begin[c]; t < st.trans_begin[c + 1]; ++t) {
      if (!(lo[t] <= hi[t]) || lo[t] < 0.0 || hi[t] > 1.0) {
        std::ostringstream os;
        os << "interval [" << lo[t] << ", " << hi[t] << "] of (" << st.choice_state[c] << ", " << st.choice_action[c]
           << ", " << st.successor[t] << ") is empty or leaves [0, 1]";
        throw NumericError(os.str());
      }
      slo += lo[t];
      shi += hi[t];
    }
    if (slo > 1.0 + 1e-12 || shi < 1.0 - 1e-12) {
      std::ostringstream os;
      os << "interval row (" << st.choice_state[c] << ", " << st.choice_action[c] << ") is infeasible: sum lo = " << slo
         << ", sum hi = " << shi;
      throw NumericError(os.str());
    }
  }
}

IntervalMDP IntervalMDP::exact(const MDPInstance& instance) {
  return {instance.structure, instance.probs, instance.probs, {"exact", 0.0, 0, 0.0}};
}

double point_estimate(const CountTable& counts, std::size_t t) {
  if (counts.trials[t] == 0) return std::numeric_limits<double>::quiet_NaN();
  return static_cast<double>(counts.outcomes[t]) / static_cast<double>(counts.trials[t]);
}

Interval wilson_cc_interval(std::int64_t k, std::int64_t h, double z) {
  if (h <= 0) throw ValidationError("Wilson interval needs at least one trial");
  if (k < 0 || k > h) throw ValidationError("Wilson interval: successes out of range");
  const double H = static_cast<double>(h);
  const double p = static_cast<double>(k) / H;
  const double z2 = z * z;
  const double denom = 2.0 * (H + z2);
  const double rl = std::max(0.0, z2 - 1.0 / H + 4.0 * H * p * (1.0 - p) + 4.0 * p - 2.0);
  const double ru = std::max(0.0, z2 - 1.0 / H + 4.0 * H * p * (1.0 - p) - 4.0 * p + 2.0);
  const double lower = (2.0 * H * p + z2 - z * std::sqrt(rl) - 1.0) / denom;
  const double upper = (2.0 * H * p + z2 + z * std::sqrt(ru) + 1.0) / denom;
  // With no successes (or no failures) the closed form picks a spurious root
  // of the squared equation; the bound is then the support end.
  return {k == 0 ? 0.0 : lower, k == h ? 1.0 : upper};
}

namespace {

IntervalMDP blank(const ParametricMDP& pmdp, std::string method, const PacConfig& cfg) {
  const auto& st = pmdp.structure();
  IntervalMDP m{pmdp.structure_ptr(), std::vector<double>(st.num_transitions(), cfg.mu),
                std::vector<double>(st.num_transitions(), 1.0), {std::move(method), cfg.gamma, 0, cfg.mu}};
  for (std::size_t t = 0; t < st.num_transitions(); ++t) {
    if (pmdp.is_known(t)) {
      const double v = pmdp.expr(t).evaluate({});
      m.lo[t] = v;
      m.hi[t] = v;
    }
  }
  return m;
}

void check_mu(double mu) {
  if (!(mu > 0.0 && mu < 1.0)) throw ValidationError("mu must lie in (0, 1)");
}

CountTable maybe_pool(const ParametricMDP& pmdp, const CountTable& counts, bool tying) {
  counts.check(pmdp.structure());
  if (counts.pooled) return counts;
  return tying ? pool_tied_counts(counts, pmdp.tie_partition(true)) : counts;
}

// Heuristic learners can emit rows whose bounds miss 1 (point estimates
// clamped to mu). Shift the excess or deficit onto the largest unknown entry.
void repair_rows(const ParametricMDP& pmdp, IntervalMDP& m) {
  const auto& st = m.s();
  for (std::size_t c = 0; c < st.num_choices(); ++c) {
    const std::size_t b = st.trans_begin[c];
    const std::size_t e = st.trans_begin[c + 1];
    double slo = 0.0;
    double shi = 0.0;
    std::size_t big = e;
    for (std::size_t t = b; t < e; ++t) {
      slo += m.lo[t];
      shi += m.hi[t];
      if (!pmdp.is_known(t) && (big == e || m.lo[t] > m.lo[big])) big = t;
    }
    if (big == e) continue;
    if (slo > 1.0) {
      m.lo[big] = std::max(m.provenance.mu, m.lo[big] - (slo - 1.0));
    }
    if (shi < 1.0) {
      m.hi[big] = std::min(1.0, m.hi[big] + (1.0 - shi));
    }
    m.hi[big] = std::max(m.hi[big], m.lo[big]);
  }
}

}  // namespace

std::size_t count_unknown_classes(const ParametricMDP& pmdp, bool tying) {
  const auto part = pmdp.tie_partition(tying);
  std::size_t n = 0;
  for (const auto& members : part.members) {
    if (std::any_of(members.begin(), members.end(), [&](std::size_t t) { return !pmdp.is_known(t); })) ++n;
  }
  return n;
}

IntervalMDP learn_pac_imdp(const ParametricMDP& pmdp, const CountTable& counts, const PacConfig& cfg) {
  if (!(cfg.gamma > 0.0 && cfg.gamma < 1.0)) throw ValidationError("PAC confidence gamma must lie in (0, 1)");
  check_mu(cfg.mu);
  const CountTable pooled = maybe_pool(pmdp, counts, cfg.tying);
  IntervalMDP m = blank(pmdp, "pac", cfg);
  const std::size_t n_u = count_unknown_classes(pmdp, cfg.tying);
  m.provenance.n_unknown = n_u;
  if (n_u == 0) {
    m.check_rows();
    return m;
  }
  const double gamma_p = cfg.gamma / static_cast<double>(n_u);
  const double z = normal_quantile(1.0 - gamma_p / 2.0);
  for (std::size_t t = 0; t < m.lo.size(); ++t) {
    if (pmdp.is_known(t) || pooled.trials[t] == 0) continue;
    const Interval w = wilson_cc_interval(pooled.outcomes[t], pooled.trials[t], z);
    m.lo[t] = std::max(cfg.mu, w.lo);
    m.hi[t] = std::max(m.lo[t], std::min(w.hi, 1.0));
  }
  m.check_rows();
  return m;
}

LuiPrior lui_update(const LuiPrior& prior, std::int64_t k, std::int64_t n) {
  if (n < 0 || k < 0 || k > n) throw ValidationError("LUI update: counts out of range");
  if (n == 0) return prior;
  const double s = prior.strength;
  const double N = static_cast<double>(n);
  const double K = static_cast<double>(k);
  return {{(s * prior.interval.lo + K) / (s + N), (s * prior.interval.hi + K) / (s + N)}, s + N};
}

IntervalMDP learn_lui_imdp(const ParametricMDP& pmdp, const CountTable& counts, const PacConfig& cfg) {
  check_mu(cfg.mu);
  const CountTable pooled = maybe_pool(pmdp, counts, cfg.tying);
  IntervalMDP m = blank(pmdp, "lui", cfg);
  const LuiPrior prior{{cfg.mu, 1.0}, cfg.lui_prior_strength};
  for (std::size_t t = 0; t < m.lo.size(); ++t) {
    if (pmdp.is_known(t)) continue;
    const LuiPrior post = lui_update(prior, pooled.outcomes[t], pooled.trials[t]);
    m.lo[t] = std::max(cfg.mu, post.interval.lo);
    m.hi[t] = std::max(m.lo[t], std::min(1.0, post.interval.hi));
  }
  repair_rows(pmdp, m);
  m.check_rows();
  return m;
}

std::vector<double> map_estimate(const std::vector<double>& alpha, const std::vector<std::int64_t>& k) {
  if (alpha.size() != k.size() || alpha.empty()) throw ValidationError("MAP: size mismatch");
  const double m = static_cast<double>(alpha.size());
  double denom = -m;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    if (alpha[i] < 1.0) throw ValidationError("MAP: concentrations must be at least 1");
    denom += alpha[i] + static_cast<double>(k[i]);
  }
  std::vector<double> out(alpha.size());
  if (denom <= 0.0) {
    std::fill(out.begin(), out.end(), 1.0 / m);
    return out;
  }
  for (std::size_t i = 0; i < alpha.size(); ++i) out[i] = (alpha[i] + static_cast<double>(k[i]) - 1.0) / denom;
  return out;
}

IntervalMDP learn_map_imdp(const ParametricMDP& pmdp, const CountTable& counts, const PacConfig& cfg) {
  check_mu(cfg.mu);
  counts.check(pmdp.structure());
  const auto& st = pmdp.structure();
  IntervalMDP m = blank(pmdp, "map", cfg);
  for (std::size_t c = 0; c < st.num_choices(); ++c) {
    std::vector<std::size_t> unknown;
    double known_mass = 0.0;
    for (std::size_t t = st.trans_begin[c]; t < st.trans_begin[c + 1]; ++t) {
      if (pmdp.is_known(t)) {
        known_mass += m.lo[t];
      } else {
        unknown.push_back(t);
      }
    }
    if (unknown.empty()) continue;
    std::vector<double> alpha(unknown.size(), cfg.map_alpha);
    std::vector<std::int64_t> k;
    std::int64_t total = 0;
    for (auto t : unknown) {
      k.push_back(counts.outcomes[t]);
      total += counts.outcomes[t];
    }
    const auto est = map_estimate(alpha, k);
    for (std::size_t i = 0; i < unknown.size(); ++i) {
      const double v = std::max(cfg.mu, est[i] * (1.0 - known_mass));
      m.lo[unknown[i]] = v;
      m.hi[unknown[i]] = v;
    }
  }
  repair_rows(pmdp, m);
  m.check_rows();
  return m;
}

double ucrl2_radius(std::size_t num_states, std::size_t num_actions, std::size_t num_transitions, double gamma,
                    std::int64_t h) {
  if (h <= 0) throw ValidationError("UCRL2 radius needs at least one visit");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ValidationError("UCRL2 confidence must lie in (0, 1)");
  const double arg = 2.0 * static_cast<double>(num_actions) * static_cast<double>(num_transitions) / gamma;
  return std::sqrt(14.0 * static_cast<double>(num_states) * std::log(arg) / static_cast<double>(h));
}

IntervalMDP learn_ucrl2_imdp(const ParametricMDP& pmdp, const CountTable& counts, const PacConfig& cfg) {
  check_mu(cfg.mu);
  const CountTable pooled = maybe_pool(pmdp, counts, cfg.tying);
  const auto& st = pmdp.structure();
  IntervalMDP m = blank(pmdp, "ucrl2", cfg);
  const std::size_t na = st.num_action_labels();
  for (std::size_t t = 0; t < m.lo.size(); ++t) {
    if (pmdp.is_known(t) || pooled.trials[t] == 0) continue;
    const double p = point_estimate(pooled, t);
    const double d = ucrl2_radius(st.num_states, na, st.num_transitions(), cfg.gamma, pooled.trials[t]);
    m.lo[t] = std::max(cfg.mu, p - d);
    m.hi[t] = std::max(m.lo[t], std::min(1.0, p + d));
  }
  repair_rows(pmdp, m);
  m.check_rows();
  return m;
}

Learner parse_learner(std::string_view name) {
  if (name == "pac") return Learner::Pac;
  if (name == "lui") return Learner::Lui;
  if (name == "map") return Learner::Map;
  if (name == "ucrl2") return Learner::Ucrl2;
  throw ValidationError("unknown learner '" + std::string(name) + "'");
}

std::string learner_name(Learner l) {
  switch (l) {
    case Learner::Pac:
      return "pac";
    case Learner::Lui:
      return "lui";
    case Learner::Map:
      return "map";
    case Learner::Ucrl2:
      return "ucrl2";
  }
  return "pac";
}

IntervalMDP learn_imdp(Learner l, const ParametricMDP& pmdp, const CountTable& counts, const PacConfig& cfg) {
  switch (l) {
    case Learner::Pac:
      return learn_pac_imdp(pmdp, counts, cfg);
    case Learner::Lui:
      return learn_lui_imdp(pmdp, counts, cfg);
    case Learner::Map:
      return learn_map_imdp(pmdp, counts, cfg);
    case Learner::Ucrl2:
      return learn_ucrl2_imdp(pmdp, counts, cfg);
  }
  throw ValidationError("unknown learner");
}

using json = nlohmann::ordered_json;

std::string serialize_imdp(const IntervalMDP& imdp) {
  const auto& st = imdp.s();
  json rows = json::array();
  for (std::size_t c = 0; c < st.num_choices(); ++c) {
    for (std::size_t t = st.trans_begin[c]; t < st.trans_begin[c + 1]; ++t) {
      rows.push_back({{"s", st.choice_state[c]},
                      {"a", st.choice_action[c]},
                      {"to", st.successor[t]},
                      {"lo", imdp.lo[t]},
                      {"hi", imdp.hi[t]}});
    }
  }
  json doc = {{"provenance",
               {{"method", imdp.provenance.method},
                {"gamma", imdp.provenance.gamma},
                {"n_unknown", imdp.provenance.n_unknown},
                {"mu", imdp.provenance.mu}}},
              {"states", st.num_states},
              {"transitions", rows}};
  return doc.dump(1) + "\n";
}

IntervalMDP parse_imdp(const StructurePtr& structure, std::string_view json_text) {
  const auto& st = *structure;
  IntervalMDP m{structure, std::vector<double>(st.num_transitions(), std::numeric_limits<double>::quiet_NaN()),
                std::vector<double>(st.num_transitions(), std::numeric_limits<double>::quiet_NaN()),
                {}};
  try {
    const json doc = json::parse(json_text);
    if (doc.contains("provenance")) {
      const auto& p = doc.at("provenance");
      m.provenance.method = p.value("method", std::string());
      m.provenance.gamma = p.value("gamma", 0.0);
      m.provenance.n_unknown = p.value("n_unknown", std::size_t{0});
      m.provenance.mu = p.value("mu", kDefaultMu);
    }
    for (const auto& r : doc.at("transitions")) {
      const auto c = st.choice_of(r.at("s").get<std::size_t>(), r.at("a").get<std::string>());
      const auto t = st.find_transition(c, r.at("to").get<std::size_t>());
      if (!t) throw ValidationError("interval for a transition outside the support");
      m.lo[*t] = r.at("lo").get<double>();
      m.hi[*t] = r.at("hi").get<double>();
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("interval MDP JSON: ") + e.what());
  }
  for (std::size_t t = 0; t < m.lo.size(); ++t) {
    if (std::isnan(m.lo[t])) throw ValidationError("interval MDP JSON misses a transition");
  }
  m.check_rows();
  return m;
}

}  // namespace upmdp
