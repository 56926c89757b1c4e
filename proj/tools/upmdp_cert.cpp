#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "upmdp/benchmarks.hpp"
#include "upmdp/error.hpp"
#include "upmdp/harness.hpp"
#include "upmdp/imdp.hpp"
#include "upmdp/learn.hpp"
#include "upmdp/model_io.hpp"
#include "upmdp/policy.hpp"
#include "upmdp/rng.hpp"
#include "upmdp/scenario.hpp"
#include "upmdp/simulate.hpp"

using namespace upmdp;
using json = nlohmann::ordered_json;

namespace {

struct ModelSource {
  std::string file;
  std::string bench;

  void attach(CLI::App* app) {
    auto* f = app->add_option("--model", file, "model document (JSON)");
    auto* b = app->add_option("--bench", bench, "builtin benchmark name");
    f->excludes(b);
  }

  ParametricMDP load() const {
    if (!file.empty()) return load_model(file);
    if (!bench.empty()) return build_benchmark(bench);
    throw ValidationError("one of --model or --bench is required");
  }
};

Direction parse_direction(const std::string& s) {
  if (s == "max" || s == "maximize") return Direction::Maximize;
  if (s == "min" || s == "minimize") return Direction::Minimize;
  throw ValidationError("direction must be max or min, got '" + s + "'");
}

// Parameter valuation from a JSON object {"name": value}.
Valuation load_theta(const ParametricMDP& pmdp, const std::string& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("theta: ") + e.what(), e.byte);
  }
  if (!j.is_object()) throw ValidationError("theta must be a JSON object of parameter values");
  std::map<std::string, double> named;
  for (const auto& [k, v] : j.items()) {
    if (!v.is_number()) throw ValidationError("theta value for '" + k + "' is not a number");
    named[k] = v.get<double>();
  }
  return Valuation::from_map(pmdp.parameters(), named);
}

std::vector<double> read_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::vector<double> values;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string tok;
    while (std::getline(ls, tok, ',')) {
      std::istringstream ts(tok);
      double v;
      std::string rest;
      if (!(ts >> v)) {
        if (tok.find_first_not_of(" \t\r") == std::string::npos) continue;
        throw ValidationError(path + ":" + std::to_string(lineno) + ": not a number: '" + tok + "'");
      }
      if (ts >> rest) throw ValidationError(path + ":" + std::to_string(lineno) + ": trailing text");
      if (std::isnan(v)) throw ValidationError(path + ":" + std::to_string(lineno) + ": NaN value");
      values.push_back(v);
    }
  }
  if (values.empty()) throw ValidationError("no values in '" + path + "'");
  return values;
}

void emit(const std::string& text, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    write_text_file(out, text);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Certified robust policies for uncertain parametric MDPs"};
  app.require_subcommand(1);

  // run
  std::string config_path, run_out;
  std::optional<std::uint64_t> run_seed;
  std::optional<std::size_t> run_threads;
  auto* run = app.add_subcommand("run", "run an experiment from a TOML or JSON config");
  run->add_option("--config", config_path, "experiment config")->required();
  run->add_option("--output", run_out, "output directory (overrides the config)");
  run->add_option("--seed", run_seed, "master seed (overrides the config)");
  run->add_option("--threads", run_threads, "worker threads, 0 for all cores");

  // bound
  std::int64_t n = 0, discard = 0;
  double gamma = 0.0, eta = 0.0;
  std::optional<std::int64_t> fixed_k;
  auto* bound = app.add_subcommand("bound", "risk bound epsilon for N samples");
  bound->add_option("--n", n, "number of samples")->required();
  bound->add_option("--gamma", gamma, "per-sample confidence level")->required();
  bound->add_option("--eta", eta, "overall confidence level")->required();
  bound->add_option("--discard", discard, "number of discarded samples");
  bound->add_option("--fixed-K", fixed_k, "use this K instead of the minimising one");

  // certify
  std::string bounds_file, direction = "max";
  std::vector<std::int64_t> discards{0};
  auto* cert = app.add_subcommand("certify", "certify per-sample bound values");
  cert->add_option("--bounds", bounds_file, "file with one value per line or comma-separated")->required();
  cert->add_option("--gamma", gamma, "confidence level behind each value")->required();
  cert->add_option("--eta", eta, "overall confidence level")->required();
  cert->add_option("--discard", discards, "discard counts");
  cert->add_option("--direction", direction, "max or min");

  // evaluate
  ModelSource eval_model;
  std::string policy_file, theta_file, imdp_file;
  auto* eval = app.add_subcommand("evaluate", "exact value of a policy on one instance");
  eval_model.attach(eval);
  eval->add_option("--policy", policy_file, "policy document")->required();
  eval->add_option("--theta", theta_file, "parameter valuation (JSON object)");
  eval->add_option("--imdp", imdp_file, "robust value on this IMDP instead of an instance");

  // simulate
  ModelSource sim_model;
  std::size_t sim_traj = 1000, sim_len = 200;
  std::uint64_t sim_seed = 0;
  std::string dump_dir, counts_out;
  auto* sim = app.add_subcommand("simulate", "sample trajectories and transition counts");
  sim_model.attach(sim);
  sim->add_option("--theta", theta_file, "parameter valuation (sampled from the prior if absent)");
  sim->add_option("--trajectories", sim_traj, "number of trajectories");
  sim->add_option("--max-length", sim_len, "maximum trajectory length");
  sim->add_option("--seed", sim_seed, "seed");
  sim->add_option("--dump-trajectories", dump_dir, "write trajectories.txt into this directory");
  sim->add_option("-o,--output", counts_out, "count table output (stdout by default)");

  // learn
  ModelSource learn_model;
  std::string counts_file, learner = "pac", learn_out;
  double mu = kDefaultMu;
  bool no_tying = false;
  auto* lrn = app.add_subcommand("learn", "learn an IMDP from a count table");
  learn_model.attach(lrn);
  lrn->add_option("--counts", counts_file, "count table (JSON)")->required();
  lrn->add_option("--learner", learner, "pac, lui, map or ucrl2");
  lrn->add_option("--gamma", gamma, "confidence level")->required();
  lrn->add_option("--mu", mu, "lower clamp for learned intervals");
  lrn->add_flag("--no-tying", no_tying, "disable parameter tying");
  lrn->add_option("-o,--output", learn_out, "IMDP output (stdout by default)");

  // bench
  std::string bench_name, bench_out;
  auto* bench = app.add_subcommand("bench", "builtin benchmarks");
  bench->require_subcommand(1);
  auto* bexport = bench->add_subcommand("export", "print the model document of a builtin");
  bexport->add_option("name", bench_name, "benchmark name")->required();
  bexport->add_option("-o,--output", bench_out, "output file (stdout by default)");
  auto* blist = bench->add_subcommand("list", "list builtin benchmarks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  }

  try {
    if (*run) {
      ExperimentConfig cfg = load_experiment_config(config_path);
      if (!run_out.empty()) cfg.output_dir = run_out;
      if (run_seed) cfg.seed = *run_seed;
      if (run_threads) cfg.threads = *run_threads;
      const auto report = run_experiment(cfg);
      std::cout << report_to_json(report, cfg);
    } else if (*bound) {
      std::cout << serialize_risk_bound(risk_bound(n, gamma, eta, discard, fixed_k)) << "\n";
    } else if (*cert) {
      const Direction dir = parse_direction(direction);
      std::vector<PerformanceSample> samples;
      for (double v : read_values(bounds_file)) samples.push_back({v, gamma, dir});
      json out = json::array();
      for (auto k : discards) {
        const Certificate c = certify(samples, eta, k);
        out.push_back({{"k", k},
                       {"guarantee", c.guarantee},
                       {"epsilon", c.bound.epsilon},
                       {"K", c.bound.K},
                       {"beta", c.bound.beta},
                       {"N", c.bound.N},
                       {"direction", direction_name(dir)}});
      }
      std::cout << out.dump(1) << "\n";
    } else if (*eval) {
      const ParametricMDP pmdp = eval_model.load();
      const Policy policy = load_policy(pmdp.structure_ptr(), policy_file);
      json out;
      if (!imdp_file.empty()) {
        const IntervalMDP imdp = parse_imdp(pmdp.structure_ptr(), read_text_file(imdp_file));
        out["robust_value"] = robust_value_iteration(imdp, false, &policy).value;
      } else {
        if (theta_file.empty()) throw ValidationError("evaluate needs --theta or --imdp");
        const auto inst = instantiate(pmdp, load_theta(pmdp, theta_file));
        out["value"] = exact_policy_value(inst, policy);
      }
      std::cout << out.dump(1) << "\n";
    } else if (*sim) {
      const ParametricMDP pmdp = sim_model.load();
      Rng rng = make_rng(sim_seed, Phase::Misc, 0);
      const Valuation theta =
          theta_file.empty() ? sample_valuation(pmdp.parameters(), rng) : load_theta(pmdp, theta_file);
      const auto inst = instantiate(pmdp, theta);
      const TrajectoryConfig tc{sim_traj, sim_len, true};
      Rng traj_rng = make_rng(sim_seed, Phase::Misc, 1);
      CountTable counts;
      if (!dump_dir.empty()) {
        std::filesystem::create_directories(dump_dir);
        std::ofstream dump(std::filesystem::path(dump_dir) / "trajectories.txt");
        if (!dump) throw ValidationError("cannot write to '" + dump_dir + "'");
        counts = collect_counts(inst, BehaviorPolicy::uniform(), tc, traj_rng, &dump);
      } else {
        counts = collect_counts(inst, BehaviorPolicy::uniform(), tc, traj_rng);
      }
      emit(serialize_counts(pmdp.structure(), counts), counts_out);
    } else if (*lrn) {
      const ParametricMDP pmdp = learn_model.load();
      const CountTable counts = parse_counts(pmdp.structure(), read_text_file(counts_file));
      PacConfig pc;
      pc.gamma = gamma;
      pc.mu = mu;
      pc.tying = !no_tying;
      emit(serialize_imdp(learn_imdp(parse_learner(learner), pmdp, counts, pc)), learn_out);
    } else if (*bench) {
      if (*blist) {
        for (const auto& name : benchmark_names()) std::cout << name << "\n";
      } else if (*bexport) {
        emit(serialize_model(build_benchmark(bench_name)), bench_out);
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kExitOk;
}
