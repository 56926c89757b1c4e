#include <gtest/gtest.h>

#include <boost/math/special_functions/beta.hpp>

#include <atomic>
#include <filesystem>
#include <limits>
#include <set>

#include <nlohmann/json.hpp>

#include "upmdp/config.hpp"
#include "upmdp/error.hpp"
#include "upmdp/harness.hpp"
#include "upmdp/imdp.hpp"
#include "upmdp/model_io.hpp"

using namespace upmdp;
using json = nlohmann::json;

namespace {

ExperimentConfig small_chain(std::uint64_t seed = 3) {
  ExperimentConfig cfg;
  cfg.benchmark.name = "chain";
  cfg.n_train = 8;
  cfg.n_verify = 20;
  cfg.n_fresh = 200;
  cfg.trajectories = 300;
  cfg.checkpoints = {100};
  cfg.discard = {0, 2, 5};
  cfg.seed = seed;
  cfg.threads = 1;
  return cfg;
}

std::string without_timings(const ExperimentReport& r, const ExperimentConfig& cfg) {
  return report_to_json(r, cfg, false);
}

}  // namespace

TEST(Toml, Subset) {
  const auto j = json::parse(toml_to_json(R"(
# comment
seed = 7
name = "chain"   # trailing comment
[learning]
checkpoints = [100, 1000]
tying = false
gamma = 1e-4
[model.distributions]
p = { dist = "beta", a = 2, b = 3.5 }
)"));
  EXPECT_EQ(j["seed"], 7);
  EXPECT_EQ(j["name"], "chain");
  EXPECT_EQ(j["learning"]["checkpoints"], json::array({100, 1000}));
  EXPECT_EQ(j["learning"]["tying"], false);
  EXPECT_DOUBLE_EQ(j["learning"]["gamma"].get<double>(), 1e-4);
  EXPECT_EQ(j["model"]["distributions"]["p"]["dist"], "beta");
  EXPECT_DOUBLE_EQ(j["model"]["distributions"]["p"]["b"].get<double>(), 3.5);
}

TEST(Toml, Errors) {
  EXPECT_THROW(toml_to_json("a = "), ParseError);
  EXPECT_THROW(toml_to_json("a = \"open"), ParseError);
  EXPECT_THROW(toml_to_json("[table"), ParseError);
  EXPECT_THROW(toml_to_json("a = 1\na = 2"), ParseError);
}

TEST(Config, ParsesSectionsAndDefaults) {
  const auto cfg = parse_experiment_config(R"(
[model]
builtin = "betting"
rounds = 4
[samples]
train = 5
verify = 7
[certificate]
gamma = 0.001
discard = [0, 1]
[run]
seed = 9
)",
                                           true);
  EXPECT_EQ(cfg.benchmark.name, "betting");
  EXPECT_EQ(cfg.benchmark.rounds, 4);
  EXPECT_EQ(cfg.n_train, 5u);
  EXPECT_EQ(cfg.n_verify, 7u);
  EXPECT_EQ(cfg.n_fresh, 1000u);
  EXPECT_EQ(cfg.gamma, 0.001);
  EXPECT_EQ(cfg.train_gamma, 0.001);
  EXPECT_EQ(cfg.discard, (std::vector<std::int64_t>{0, 1}));
  EXPECT_EQ(cfg.seed, 9u);
}

TEST(Config, JsonAndErrors) {
  EXPECT_EQ(parse_experiment_config(R"({"samples": {"train": 3}, "learning": {"train_learner": "map"}})", false)
                .train_learner,
            Learner::Map);
  EXPECT_THROW(parse_experiment_config(R"({"sample": {"train": 3}})", false), ValidationError);
  EXPECT_THROW(parse_experiment_config(R"({"certificate": {"gamma": 1.5}})", false), ValidationError);
  EXPECT_THROW(parse_experiment_config(R"({"certificate": {"eta": 0}})", false), ValidationError);
  EXPECT_THROW(parse_experiment_config(R"({"samples": {"verify": 0}})", false), ValidationError);
  EXPECT_THROW(parse_experiment_config(R"({"samples": {"verify": 5}, "certificate": {"discard": [5]}})", false),
               ValidationError);
  EXPECT_THROW(parse_experiment_config(R"({"learning": {"train_learner": "rl"}})", false), ValidationError);
  EXPECT_THROW(parse_experiment_config(R"({"samples": {"train": "many"}})", false), ValidationError);
  EXPECT_THROW(parse_experiment_config("{", false), ParseError);
}

TEST(Experiment, ReportConsistency) {
  const auto cfg = small_chain();
  const auto r = run_experiment(cfg);
  ASSERT_TRUE(r.error.empty());
  ASSERT_EQ(r.samples.size(), cfg.n_verify);
  ASSERT_EQ(r.certificates.size(), cfg.discard.size());
  std::vector<double> values;
  for (const auto& s : r.samples) values.push_back(s.j_gamma);
  for (const auto& c : r.certificates) {
    const auto b = risk_bound(std::int64_t(cfg.n_verify), cfg.gamma, cfg.eta, c.k);
    EXPECT_EQ(c.bound.epsilon, b.epsilon);
    EXPECT_EQ(c.bound.K, b.K);
    EXPECT_EQ(c.guarantee, order_statistic(values, c.k, r.direction));
  }
  EXPECT_EQ(r.certificates[0].guarantee, *std::max_element(values.begin(), values.end()));  // Minimize
  for (std::size_t i = 1; i < r.certificates.size(); ++i) {
    EXPECT_LE(r.certificates[i].guarantee, r.certificates[i - 1].guarantee);
  }
  std::set<std::size_t> train(r.train_ids.begin(), r.train_ids.end());
  for (auto id : r.verify_ids) EXPECT_FALSE(train.count(id));
  EXPECT_EQ(train.size(), cfg.n_train);
  EXPECT_EQ(r.curve.size(), 2u);
  EXPECT_EQ(r.curve.back().trajectories, cfg.trajectories);
}

TEST(Experiment, DeterministicAcrossThreadCounts) {
  auto a = small_chain(5);
  auto b = small_chain(5);
  b.threads = 3;
  EXPECT_EQ(without_timings(run_experiment(a), a), without_timings(run_experiment(b), b));
  auto c = small_chain(6);
  EXPECT_NE(without_timings(run_experiment(a), a), without_timings(run_experiment(c), c));
}

TEST(Experiment, MaximizeGuaranteesIncreaseWithK) {
  ExperimentConfig cfg;
  cfg.benchmark.name = "betting";
  cfg.benchmark.rounds = 3;
  cfg.n_train = 5;
  cfg.n_verify = 15;
  cfg.n_fresh = 50;
  cfg.trajectories = 200;
  cfg.discard = {0, 1, 3};
  cfg.seed = 2;
  const auto r = run_experiment(cfg);
  EXPECT_EQ(r.direction, Direction::Maximize);
  for (std::size_t i = 1; i < r.certificates.size(); ++i) {
    EXPECT_GE(r.certificates[i].guarantee, r.certificates[i - 1].guarantee);
  }
}

TEST(Experiment, WritesReportFiles) {
  auto cfg = small_chain();
  cfg.output_dir = (std::filesystem::temp_directory_path() / "upmdp_harness_test").string();
  std::filesystem::remove_all(cfg.output_dir);
  run_experiment(cfg);
  const auto j = json::parse(read_text_file(std::filesystem::path(cfg.output_dir) / "certificate.json"));
  EXPECT_EQ(j["certificates"].size(), 3u);
  EXPECT_FALSE(j.contains("error"));
  const auto csv = read_text_file(std::filesystem::path(cfg.output_dir) / "samples.csv");
  EXPECT_EQ(csv.rfind("sample_id,J_gamma,included_check,seed\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), long(cfg.n_verify) + 1);
  EXPECT_TRUE(std::filesystem::exists(std::filesystem::path(cfg.output_dir) / "curve.csv"));
}

TEST(Experiment, FlushesErrorMarker) {
  auto cfg = small_chain();
  cfg.model_file = "/nonexistent/model.json";
  cfg.output_dir = (std::filesystem::temp_directory_path() / "upmdp_harness_error").string();
  std::filesystem::remove_all(cfg.output_dir);
  EXPECT_THROW(run_experiment(cfg), ValidationError);
  const auto j = json::parse(read_text_file(std::filesystem::path(cfg.output_dir) / "certificate.json"));
  EXPECT_TRUE(j.contains("error"));
}

TEST(EmpiricalRisk, VacuousGuarantees) {
  const auto m = build_benchmark("betting");
  const auto pol = Policy::uniform(m.structure_ptr());
  Rng rng(1);
  EXPECT_EQ(empirical_risk(m, pol, -std::numeric_limits<double>::infinity(), 50, rng, Direction::Maximize), 0.0);
  EXPECT_EQ(empirical_risk(m, pol, 0.0, 50, rng, Direction::Maximize), 0.0);
  EXPECT_EQ(empirical_risk(m, pol, 1e9, 50, rng, Direction::Maximize), 1.0);
  EXPECT_THROW(empirical_risk(m, pol, 0.0, 0, rng, Direction::Maximize), ValidationError);
}

TEST(EmpiricalRisk, AgreesWithQuadrature) {
  const auto m = build_benchmark("chain");
  // Always playing a makes the expected step count decrease in p, so the
  // value exceeds J(0.4) exactly when p < 0.4.
  const auto pol = Policy::deterministic(m.structure_ptr(), std::vector<std::size_t>(m.structure().num_states, 0));
  const double threshold = exact_policy_value(instantiate(m, Valuation{{0.4}}), pol);
  const double exact = true_risk_quadrature(m, pol, threshold, 4000);
  EXPECT_NEAR(exact, boost::math::ibeta(5.0, 5.0, 0.4), 1e-3);
  Rng rng(2);
  const double mc = empirical_risk(m, pol, threshold, 4000, rng, Direction::Minimize);
  EXPECT_NEAR(mc, exact, 4 * std::sqrt(exact * (1 - exact) / 4000));
}

TEST(ParallelFor, CoversAndRethrows) {
  std::vector<int> hit(1000, 0);
  parallel_for(hit.size(), 4, [&](std::size_t i) { hit[i]++; });
  EXPECT_EQ(std::count(hit.begin(), hit.end(), 1), 1000);
  EXPECT_THROW(parallel_for(100, 4,
                            [](std::size_t i) {
                              if (i == 37) throw NumericError("boom");
                            }),
               NumericError);
}
