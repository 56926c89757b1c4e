#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "upmdp/benchmarks.hpp"
#include "upmdp/learn.hpp"
#include "upmdp/model.hpp"
#include "upmdp/policy.hpp"
#include "upmdp/rng.hpp"
#include "upmdp/scenario.hpp"

namespace upmdp {

struct ExperimentConfig {
  BenchmarkSpec benchmark;  // used unless model_file is set
  std::string model_file;
  std::string policy_file;  // skip training and certify this policy
  std::size_t n_train = 100;
  std::size_t n_verify = 100;
  std::size_t n_fresh = 1000;
  std::size_t trajectories = 10000;
  std::size_t max_length = 200;
  // Extra trajectory counts at which the pipeline is re-run for the
  // guarantee-versus-data curve; the final count is always `trajectories`.
  std::vector<std::size_t> checkpoints;
  double gamma = 1e-4;
  double eta = 1e-2;
  std::vector<std::int64_t> discard{0};
  Learner train_learner = Learner::Pac;
  double train_gamma = 1e-4;
  double mu = kDefaultMu;
  bool tying = true;
  std::uint64_t seed = 0;
  std::size_t threads = 0;  // 0: hardware concurrency
  std::string output_dir;

  void validate() const;
};

struct SampleResult {
  std::size_t id = 0;       // global environment index
  std::uint64_t seed = 0;   // seed of the environment's trajectory stream
  double j_gamma = 0.0;     // robust value on the PAC IMDP
  double j_true = 0.0;      // oracle: value on the hidden instance
  bool included = false;    // oracle: hidden instance inside the PAC IMDP
};

struct CertificateResult {
  std::int64_t k = 0;
  double guarantee = 0.0;
  RiskBound bound;
  double empirical_risk = 0.0;
};

struct CurvePoint {
  std::size_t trajectories = 0;
  double guarantee = 0.0;  // k = first entry of the discard list
  double epsilon = 0.0;
  double true_robust_j = 0.0;
};

struct ExperimentReport {
  Direction direction = Direction::Maximize;
  std::size_t num_states = 0;
  std::size_t num_transitions = 0;
  std::vector<std::size_t> train_ids;
  std::vector<std::size_t> verify_ids;
  double train_value = 0.0;  // robust value of the policy on the merged training IMDP
  Policy policy;
  std::vector<SampleResult> samples;
  std::vector<CertificateResult> certificates;
  double true_robust_j = 0.0;  // worst value over the hidden verification instances
  std::vector<CurvePoint> curve;
  std::map<std::string, double> timings;  // seconds
  std::string error;
};

ExperimentConfig parse_experiment_config(std::string_view text, bool toml);
// TOML for *.toml files, JSON otherwise.
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

ParametricMDP experiment_model(const ExperimentConfig& cfg);

// Runs the full pipeline; with an output directory, writes the report
// (also on failure, with the error recorded) before returning or throwing.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

// Fraction of n_fresh fresh instances on which `policy` is strictly worse
// than `guarantee`.
double empirical_risk(const ParametricMDP& pmdp, const Policy& policy, double guarantee, std::size_t n_fresh,
                      Rng& rng, Direction direction);

// Oracle for single-parameter models: probability that `policy` is worse
// than `guarantee`, by `points` equal-mass quantile nodes of the prior.
double true_risk_quadrature(const ParametricMDP& pmdp, const Policy& policy, double guarantee, std::size_t points);

std::string report_to_json(const ExperimentReport& report, const ExperimentConfig& cfg, bool with_timings = true);
std::string samples_csv(const ExperimentReport& report);
std::string curve_csv(const ExperimentReport& report);
void write_report(const ExperimentReport& report, const ExperimentConfig& cfg, const std::filesystem::path& dir);

// Calls fn(i) for i in [0, n) on up to `threads` workers and rethrows the
// first exception.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace upmdp
