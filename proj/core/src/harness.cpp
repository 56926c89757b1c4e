#include "upmdp/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/uniform.hpp>
#include <nlohmann/json.hpp>

#include "upmdp/config.hpp"
#include "upmdp/error.hpp"
#include "upmdp/imdp.hpp"
#include "upmdp/model_io.hpp"
#include "upmdp/simulate.hpp"

namespace upmdp {

using json = nlohmann::ordered_json;

void ExperimentConfig::validate() const {
  if (n_train == 0 || n_verify == 0 || n_fresh == 0) throw ValidationError("sample counts must be positive");
  if (trajectories == 0 || max_length == 0) throw ValidationError("trajectory counts must be positive");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ValidationError("gamma must lie in (0, 1)");
  if (!(train_gamma > 0.0 && train_gamma < 1.0)) throw ValidationError("train_gamma must lie in (0, 1)");
  if (!(eta > 0.0 && eta < 1.0)) throw ValidationError("eta must lie in (0, 1)");
  if (!(mu > 0.0 && mu < 1.0)) throw ValidationError("mu must lie in (0, 1)");
  if (discard.empty()) throw ValidationError("discard list must not be empty");
  for (auto k : discard) {
    if (k < 0 || static_cast<std::size_t>(k) >= n_verify) {
      throw ValidationError("discard count " + std::to_string(k) + " must lie in [0, N_verify)");
    }
  }
  for (auto c : checkpoints) {
    if (c == 0 || c > trajectories) throw ValidationError("checkpoints must lie in [1, trajectories]");
  }
}

namespace {

Distribution parse_distribution(const json& j, const std::string& name) {
  const auto kind = j.at("dist").get<std::string>();
  const double a = j.at("a").get<double>();
  const double b = j.at("b").get<double>();
  if (kind == "beta") return Distribution::beta(a, b);
  if (kind == "uniform") return Distribution::uniform(a, b);
  throw ValidationError("parameter '" + name + "': unknown distribution '" + kind + "'");
}

// Reads keys from a (possibly sectioned) document and rejects leftovers.
class Reader {
 public:
  explicit Reader(const json& doc) : doc_(doc) {}

  const json* find(const char* section, const char* key) {
    if (section && doc_.contains(section) && doc_.at(section).is_object() && doc_.at(section).contains(key)) {
      used_.insert(std::string(section) + "." + key);
      return &doc_.at(section).at(key);
    }
    if (doc_.contains(key)) {
      used_.insert(key);
      return &doc_.at(key);
    }
    return nullptr;
  }

  template <typename T>
  void get(const char* section, const char* key, T& out) {
    if (const json* j = find(section, key)) out = j->get<T>();
  }

  void check_unused() const {
    for (const auto& [k, v] : doc_.items()) {
      if (v.is_object() && k != "distributions") {
        for (const auto& [k2, v2] : v.items()) {
          (void)v2;
          if (!used_.count(k + "." + k2)) throw ValidationError("unknown config key '" + k + "." + k2 + "'");
        }
      } else if (!used_.count(k)) {
        throw ValidationError("unknown config key '" + k + "'");
      }
    }
  }

 private:
  const json& doc_;
  std::set<std::string> used_;
};

ExperimentConfig config_from_json(const json& doc) {
  if (!doc.is_object()) throw ValidationError("config must be a table / object");
  ExperimentConfig cfg;
  Reader r(doc);
  auto& b = cfg.benchmark;
  r.get("model", "builtin", b.name);
  r.get("model", "file", cfg.model_file);
  r.get("model", "chain_length", b.chain_length);
  r.get("model", "rounds", b.rounds);
  r.get("model", "start_coins", b.start_coins);
  r.get("model", "bets", b.bets);
  r.get("model", "width", b.width);
  r.get("model", "height", b.height);
  r.get("model", "depth", b.depth);
  r.get("model", "max_silent_moves", b.max_silent_moves);
  r.get("model", "max_failed_sends", b.max_failed_sends);
  if (const json* d = r.find("model", "distributions")) {
    for (const auto& [name, spec] : d->items()) b.distributions[name] = parse_distribution(spec, name);
  }
  r.get("samples", "train", cfg.n_train);
  r.get("samples", "verify", cfg.n_verify);
  r.get("samples", "fresh", cfg.n_fresh);
  r.get("learning", "trajectories", cfg.trajectories);
  r.get("learning", "max_length", cfg.max_length);
  r.get("learning", "checkpoints", cfg.checkpoints);
  std::string learner = learner_name(cfg.train_learner);
  r.get("learning", "train_learner", learner);
  cfg.train_learner = parse_learner(learner);
  bool train_gamma_set = r.find("learning", "train_gamma") != nullptr;
  r.get("learning", "train_gamma", cfg.train_gamma);
  r.get("learning", "mu", cfg.mu);
  r.get("learning", "tying", cfg.tying);
  r.get("certificate", "gamma", cfg.gamma);
  r.get("certificate", "eta", cfg.eta);
  r.get("certificate", "discard", cfg.discard);
  if (!train_gamma_set) cfg.train_gamma = cfg.gamma;
  r.get("run", "seed", cfg.seed);
  r.get("run", "threads", cfg.threads);
  r.get("run", "output_dir", cfg.output_dir);
  r.get("run", "policy_file", cfg.policy_file);
  r.check_unused();
  cfg.validate();
  return cfg;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double worst(std::span<const double> values, Direction dir) {
  return dir == Direction::Maximize ? *std::min_element(values.begin(), values.end())
                                    : *std::max_element(values.begin(), values.end());
}

struct Environment {
  std::size_t id = 0;
  std::uint64_t seed = 0;
  MDPInstance instance;
  std::unique_ptr<TrajectoryCollector> collector;
};

std::vector<Environment> make_environments(const ParametricMDP& pmdp, const ExperimentConfig& cfg, Phase valuation,
                                           Phase trajectories, std::size_t first_id, std::size_t n) {
  std::vector<Environment> envs(n);
  parallel_for(n, cfg.threads, [&](std::size_t i) {
    Rng rng = make_rng(cfg.seed, valuation, i);
    Environment& e = envs[i];
    e.id = first_id + i;
    e.seed = derive_seed(cfg.seed, trajectories, i);
    e.instance = instantiate(pmdp, sample_valuation(pmdp.parameters(), rng));
    e.collector = std::make_unique<TrajectoryCollector>(e.instance, BehaviorPolicy::uniform(), cfg.max_length, true,
                                                        e.seed);
  });
  return envs;
}

}  // namespace

ExperimentConfig parse_experiment_config(std::string_view text, bool toml) {
  json doc;
  try {
    doc = json::parse(toml ? toml_to_json(text) : std::string(text));
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config JSON: ") + e.what(), e.byte);
  }
  try {
    return config_from_json(doc);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  return parse_experiment_config(read_text_file(path), path.extension() == ".toml");
}

ParametricMDP experiment_model(const ExperimentConfig& cfg) {
  return cfg.model_file.empty() ? build_benchmark(cfg.benchmark) : load_model(cfg.model_file);
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

double empirical_risk(const ParametricMDP& pmdp, const Policy& policy, double guarantee, std::size_t n_fresh,
                      Rng& rng, Direction direction) {
  if (n_fresh == 0) throw ValidationError("empirical risk needs at least one fresh sample");
  std::vector<double> values;
  values.reserve(n_fresh);
  for (std::size_t i = 0; i < n_fresh; ++i) {
    const auto inst = instantiate(pmdp, sample_valuation(pmdp.parameters(), rng));
    values.push_back(exact_policy_value(inst, policy));
  }
  return violation_fraction(values, guarantee, direction);
}

double true_risk_quadrature(const ParametricMDP& pmdp, const Policy& policy, double guarantee, std::size_t points) {
  if (pmdp.parameters().size() != 1) throw ValidationError("quadrature oracle needs a single-parameter model");
  if (points == 0) throw ValidationError("quadrature needs at least one node");
  const auto& d = pmdp.parameters()[0].dist;
  std::vector<double> values;
  values.reserve(points);
  for (std::size_t j = 0; j < points; ++j) {
    const double u = (static_cast<double>(j) + 0.5) / static_cast<double>(points);
    const double x = d.kind == Distribution::Kind::Beta
                         ? boost::math::quantile(boost::math::beta_distribution<double>(d.a, d.b), u)
                         : boost::math::quantile(boost::math::uniform_distribution<double>(d.a, d.b), u);
    const auto inst = instantiate(pmdp, Valuation{{x}});
    values.push_back(exact_policy_value(inst, policy));
  }
  return violation_fraction(values, guarantee, pmdp.structure().objective.direction);
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentReport report;
  try {
    const auto t_start = std::chrono::steady_clock::now();
    const ParametricMDP pmdp = experiment_model(cfg);
    const auto& st = pmdp.structure();
    const Direction dir = st.objective.direction;
    report.direction = dir;
    report.num_states = st.num_states;
    report.num_transitions = st.num_transitions();

    // Training uses environment ids [0, n_train), verification the next
    // n_verify ids; the valuation streams are also distinct phases.
    auto t0 = std::chrono::steady_clock::now();
    auto train = make_environments(pmdp, cfg, Phase::TrainValuation, Phase::TrainTrajectories, 0, cfg.n_train);
    auto verify =
        make_environments(pmdp, cfg, Phase::VerifyValuation, Phase::VerifyTrajectories, cfg.n_train, cfg.n_verify);
    for (const auto& e : train) report.train_ids.push_back(e.id);
    for (const auto& e : verify) report.verify_ids.push_back(e.id);
    report.timings["sample"] = seconds_since(t0);

    std::optional<Policy> external;
    if (!cfg.policy_file.empty()) external = load_policy(pmdp.structure_ptr(), cfg.policy_file);

    std::vector<std::size_t> stops = cfg.checkpoints;
    stops.push_back(cfg.trajectories);
    std::sort(stops.begin(), stops.end());
    stops.erase(std::unique(stops.begin(), stops.end()), stops.end());

    PacConfig train_cfg{cfg.train_gamma, cfg.mu, cfg.tying};
    PacConfig verify_cfg{cfg.gamma, cfg.mu, cfg.tying};
    std::size_t done = 0;
    for (std::size_t stop : stops) {
      const std::size_t more = stop - done;
      done = stop;

      // Training: learn per environment, merge, optimise.
      t0 = std::chrono::steady_clock::now();
      Policy policy;
      if (external) {
        policy = *external;
        report.train_value = std::numeric_limits<double>::quiet_NaN();
      } else {
        std::vector<IntervalMDP> learned(train.size());
        parallel_for(train.size(), cfg.threads, [&](std::size_t i) {
          train[i].collector->run(more);
          learned[i] = learn_imdp(cfg.train_learner, pmdp, train[i].collector->counts(), train_cfg);
        });
        const IntervalMDP merged = merge_all(learned);
        auto res = robust_value_iteration(merged, true);
        policy = res.policy;
        report.train_value = res.value;
      }
      report.timings["train"] += seconds_since(t0);

      // Verification: PAC IMDP per environment, robust value of the policy.
      t0 = std::chrono::steady_clock::now();
      std::vector<SampleResult> samples(verify.size());
      parallel_for(verify.size(), cfg.threads, [&](std::size_t i) {
        auto& e = verify[i];
        e.collector->run(more);
        const IntervalMDP imdp = learn_pac_imdp(pmdp, e.collector->counts(), verify_cfg);
        SampleResult& r = samples[i];
        r.id = e.id;
        r.seed = e.seed;
        r.j_gamma = robust_value_iteration(imdp, false, &policy).value;
        r.j_true = exact_policy_value(e.instance, policy);
        r.included = imdp.includes(e.instance);
      });
      report.timings["verify"] += seconds_since(t0);

      std::vector<PerformanceSample> perf;
      std::vector<double> truth;
      for (const auto& s : samples) {
        perf.push_back({s.j_gamma, cfg.gamma, dir});
        truth.push_back(s.j_true);
      }
      std::vector<CertificateResult> certs;
      for (auto k : cfg.discard) {
        const Certificate c = certify(perf, cfg.eta, k);
        certs.push_back({k, c.guarantee, c.bound, 0.0});
      }
      const double true_j = worst(truth, dir);
      report.curve.push_back({stop, certs.front().guarantee, certs.front().bound.epsilon, true_j});

      if (stop == stops.back()) {
        report.samples = std::move(samples);
        report.certificates = std::move(certs);
        report.true_robust_j = true_j;
        report.policy = std::move(policy);
      }
    }

    // Oracle: fresh hidden instances, never seen by the certified pipeline.
    t0 = std::chrono::steady_clock::now();
    std::vector<double> fresh(cfg.n_fresh);
    parallel_for(cfg.n_fresh, cfg.threads, [&](std::size_t i) {
      Rng rng = make_rng(cfg.seed, Phase::FreshValuation, i);
      const auto inst = instantiate(pmdp, sample_valuation(pmdp.parameters(), rng));
      fresh[i] = exact_policy_value(inst, report.policy);
    });
    for (auto& c : report.certificates) c.empirical_risk = violation_fraction(fresh, c.guarantee, dir);
    report.timings["fresh"] = seconds_since(t0);
    report.timings["total"] = seconds_since(t_start);
  } catch (const std::exception& e) {
    report.error = e.what();
    if (!cfg.output_dir.empty()) write_report(report, cfg, cfg.output_dir);
    throw;
  }
  if (!cfg.output_dir.empty()) write_report(report, cfg, cfg.output_dir);
  return report;
}

std::string report_to_json(const ExperimentReport& report, const ExperimentConfig& cfg, bool with_timings) {
  json j;
  json c;
  c["model"] = cfg.model_file.empty() ? cfg.benchmark.name : cfg.model_file;
  c["n_train"] = cfg.n_train;
  c["n_verify"] = cfg.n_verify;
  c["n_fresh"] = cfg.n_fresh;
  c["trajectories"] = cfg.trajectories;
  c["max_length"] = cfg.max_length;
  c["gamma"] = cfg.gamma;
  c["eta"] = cfg.eta;
  c["train_learner"] = learner_name(cfg.train_learner);
  c["train_gamma"] = cfg.train_gamma;
  c["mu"] = cfg.mu;
  c["tying"] = cfg.tying;
  c["seed"] = cfg.seed;
  j["config"] = c;
  if (!report.error.empty()) j["error"] = report.error;
  j["direction"] = direction_name(report.direction);
  j["states"] = report.num_states;
  j["transitions"] = report.num_transitions;
  j["train_ids"] = report.train_ids;
  j["verify_ids"] = report.verify_ids;
  j["train_value"] = std::isfinite(report.train_value) ? json(report.train_value) : json();
  json certs = json::array();
  for (const auto& cr : report.certificates) {
    certs.push_back({{"k", cr.k},
                     {"guarantee", cr.guarantee},
                     {"epsilon", cr.bound.epsilon},
                     {"K", cr.bound.K},
                     {"beta", cr.bound.beta},
                     {"N", cr.bound.N},
                     {"k_selection", "minimal epsilon over all admissible K"},
                     {"empirical_risk", cr.empirical_risk}});
  }
  j["certificates"] = certs;
  j["true_robust_J"] = report.true_robust_j;
  json samples = json::array();
  for (const auto& s : report.samples) {
    samples.push_back(
        {{"id", s.id}, {"seed", s.seed}, {"J_gamma", s.j_gamma}, {"J_true", s.j_true}, {"included", s.included}});
  }
  j["samples"] = samples;
  json curve = json::array();
  for (const auto& p : report.curve) {
    curve.push_back({{"trajectories", p.trajectories},
                     {"guarantee", p.guarantee},
                     {"epsilon", p.epsilon},
                     {"true_robust_J", p.true_robust_j}});
  }
  j["curve"] = curve;
  if (!report.policy.empty()) j["policy"] = json::parse(serialize_policy(report.policy));
  if (with_timings) j["timings"] = report.timings;
  return j.dump(1) + "\n";
}

std::string samples_csv(const ExperimentReport& report) {
  std::ostringstream os;
  os.precision(17);
  os << "sample_id,J_gamma,included_check,seed\n";
  for (const auto& s : report.samples) {
    os << s.id << ',' << s.j_gamma << ',' << (s.included ? 1 : 0) << ',' << s.seed << '\n';
  }
  return os.str();
}

std::string curve_csv(const ExperimentReport& report) {
  std::ostringstream os;
  os.precision(17);
  os << "trajectories,guarantee,epsilon,true_robust_J\n";
  for (const auto& p : report.curve) {
    os << p.trajectories << ',' << p.guarantee << ',' << p.epsilon << ',' << p.true_robust_j << '\n';
  }
  return os.str();
}

void write_report(const ExperimentReport& report, const ExperimentConfig& cfg, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text_file(dir / "certificate.json", report_to_json(report, cfg));
  write_text_file(dir / "samples.csv", samples_csv(report));
  write_text_file(dir / "curve.csv", curve_csv(report));
}

}  // namespace upmdp
