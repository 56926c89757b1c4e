#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "upmdp/model.hpp"

namespace upmdp {

struct BenchmarkSpec {
  std::string name = "chain";
  // chain
  int chain_length = 6;  // number of forward moves to the goal
  // betting
  int rounds = 8;
  int start_coins = 10;
  std::vector<int> bets{0, 1, 2, 5, 10};
  // aircraft, semiauto and uav grids
  int width = 0;   // 0 selects the benchmark default
  int height = 0;
  int depth = 0;   // uav only
  // semiauto
  int max_silent_moves = 2;   // moves allowed without a successful message
  int max_failed_sends = 2;   // consecutive losses before the mission fails
  // Replaces the default distribution of the named parameter.
  std::map<std::string, Distribution> distributions;
};

std::vector<std::string> benchmark_names();

// Throws ValidationError for unknown names or non-positive knobs.
ParametricMDP build_benchmark(const BenchmarkSpec& spec);
ParametricMDP build_benchmark(const std::string& name);

}  // namespace upmdp
