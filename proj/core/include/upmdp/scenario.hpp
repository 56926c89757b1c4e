#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "upmdp/model.hpp"

namespace upmdp {

// Robust performance J^gamma of one sampled environment.
struct PerformanceSample {
  double value = 0.0;
  double gamma = 0.0;  // confidence of the learned IMDP behind `value`
  Direction direction = Direction::Maximize;
};

struct RiskBound {
  double epsilon = 0.0;
  std::int64_t K = 0;  // size of the compression / agreement set
  double beta = 0.0;   // confidence mass left for the sample
  std::int64_t N = 0;
  std::int64_t discarded = 0;
  double gamma = 0.0;
  double eta = 0.0;
};

struct Certificate {
  double guarantee = 0.0;  // J~ : the k-th order statistic
  RiskBound bound;
  Direction direction = Direction::Maximize;
};

// beta(K) = sum_{i=K}^{N-k} C(N-k, i) (1-gamma)^i gamma^(N-k-i) - (1 - eta).
double risk_lhs(std::int64_t N, std::int64_t k, std::int64_t K, double gamma, double eta);

// Solves sum_{i=0}^{d} C(N, i) eps^i (1-eps)^(N-i) = beta for eps by
// bisection; the returned eps never undershoots the root.
double solve_epsilon_for_beta(std::int64_t N, std::int64_t d, double beta);

// Smallest epsilon over all admissible K (or exactly `fixed_K`).
RiskBound risk_bound(std::int64_t N, double gamma, double eta, std::int64_t discarded,
                     std::optional<std::int64_t> fixed_K = std::nullopt);

// k-th worst value (0-based): k-th smallest under Maximize, k-th largest
// under Minimize.
double order_statistic(std::span<const double> values, std::int64_t k, Direction direction);

Certificate certify(std::span<const PerformanceSample> samples, double eta, std::int64_t discarded);

// Fraction of `values` strictly worse than `guarantee`.
double violation_fraction(std::span<const double> values, double guarantee, Direction direction);

std::string serialize_risk_bound(const RiskBound& b);

}  // namespace upmdp
