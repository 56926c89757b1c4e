#pragma once

#include <cstdint>
#include <random>

namespace upmdp {

using Rng = std::mt19937_64;

// Independent streams of one experiment.
enum class Phase : std::uint64_t {
  TrainValuation = 1,
  VerifyValuation = 2,
  FreshValuation = 3,
  TrainTrajectories = 4,
  VerifyTrajectories = 5,
  Misc = 6,
};

// SplitMix64 finaliser.
std::uint64_t mix64(std::uint64_t x);

// Seed of stream `index` in `phase` of an experiment with master seed `seed`.
// Streams depend only on (seed, phase, index), never on scheduling.
std::uint64_t derive_seed(std::uint64_t seed, Phase phase, std::uint64_t index);

inline Rng make_rng(std::uint64_t seed, Phase phase, std::uint64_t index) {
  return Rng(derive_seed(seed, phase, index));
}

}  // namespace upmdp
