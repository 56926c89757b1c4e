#include "upmdp/scenario.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "upmdp/error.hpp"
#include "upmdp/special.hpp"

namespace upmdp {

double risk_lhs(std::int64_t N, std::int64_t k, std::int64_t K, double gamma, double eta) {
  const std::int64_t n = N - k;
  if (K > n) return -(1.0 - eta);
  // P[Bin(n, 1-gamma) >= K] - (1 - eta) = eta - P[Bin(n, gamma) >= n - K + 1],
  // which avoids cancellation against 1 - eta.
  return eta - binomial_upper_tail(n - K + 1, n, gamma);
}

double solve_epsilon_for_beta(std::int64_t N, std::int64_t d, double beta) {
  if (N <= 0) throw ValidationError("sample size must be positive");
  if (d < 0 || d >= N) throw ValidationError("d = N - K must satisfy 0 <= d < N");
  if (!(beta > 0.0 && beta < 1.0)) throw ValidationError("beta must lie in (0, 1)");
  // The CDF falls from 1 at eps = 0 to 0 at eps = 1.
  double lo = 0.0;
  double hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (binomial_cdf(d, N, mid) > beta) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;
}

RiskBound risk_bound(std::int64_t N, double gamma, double eta, std::int64_t discarded,
                     std::optional<std::int64_t> fixed_K) {
  if (N <= 0) throw ValidationError("sample size N must be positive");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ValidationError("gamma must lie in [0, 1)");
  if (!(eta > 0.0 && eta < 1.0)) throw ValidationError("eta must lie in (0, 1)");
  if (discarded < 0 || discarded >= N) throw ValidationError("discarded samples k must satisfy 0 <= k < N");
  const std::int64_t n = N - discarded;

  RiskBound best;
  best.N = N;
  best.discarded = discarded;
  best.gamma = gamma;
  best.eta = eta;
  best.epsilon = 2.0;

  if (fixed_K) {
    const std::int64_t K = *fixed_K;
    if (K < 1 || K > n) throw ValidationError("fixed K must satisfy 1 <= K <= N - k");
    const double beta = risk_lhs(N, discarded, K, gamma, eta);
    if (!(beta > 0.0)) throw InfeasibleError("no confidence mass left for K = " + std::to_string(K));
    best.K = K;
    best.beta = beta;
    best.epsilon = solve_epsilon_for_beta(N, N - K, beta);
    return best;
  }

  for (std::int64_t K = n; K >= 1; --K) {
    const std::int64_t d = N - K;
    const double beta = risk_lhs(N, discarded, K, gamma, eta);
    if (!(beta > 0.0)) continue;
    // For any smaller K, d grows and beta stays below eta, so eps(d, eta)
    // bounds every later candidate from below.
    if (best.epsilon <= 1.0 && solve_epsilon_for_beta(N, d, eta) >= best.epsilon) break;
    const double eps = solve_epsilon_for_beta(N, d, beta);
    if (eps < best.epsilon) {
      best.epsilon = eps;
      best.K = K;
      best.beta = beta;
    }
  }
  if (best.epsilon > 1.0) {
    throw InfeasibleError("no K satisfies the risk equation for N = " + std::to_string(N) +
                          ", gamma = " + std::to_string(gamma) + ", k = " + std::to_string(discarded));
  }
  return best;
}

double order_statistic(std::span<const double> values, std::int64_t k, Direction direction) {
  if (k < 0 || static_cast<std::size_t>(k) >= values.size()) throw ValidationError("order statistic index out of range");
  std::vector<double> v(values.begin(), values.end());
  for (double x : v) {
    if (std::isnan(x)) throw ValidationError("performance sample is NaN");
  }
  auto nth = v.begin() + k;
  if (direction == Direction::Maximize) {
    std::nth_element(v.begin(), nth, v.end());
  } else {
    std::nth_element(v.begin(), nth, v.end(), std::greater<double>());
  }
  return *nth;
}

Certificate certify(std::span<const PerformanceSample> samples, double eta, std::int64_t discarded) {
  if (samples.empty()) throw ValidationError("certification needs at least one sample");
  const double gamma = samples.front().gamma;
  const Direction dir = samples.front().direction;
  std::vector<double> values;
  values.reserve(samples.size());
  for (const auto& s : samples) {
    if (s.gamma != gamma) throw ValidationError("all samples must share one confidence gamma");
    if (s.direction != dir) throw ValidationError("all samples must share one direction");
    values.push_back(s.value);
  }
  const auto N = static_cast<std::int64_t>(samples.size());
  if (discarded < 0 || discarded >= N) throw ValidationError("discarded samples k must satisfy 0 <= k < N");
  Certificate c;
  c.direction = dir;
  c.guarantee = order_statistic(values, discarded, dir);
  c.bound = risk_bound(N, gamma, eta, discarded);
  return c;
}

double violation_fraction(std::span<const double> values, double guarantee, Direction direction) {
  if (values.empty()) return 0.0;
  std::size_t bad = 0;
  for (double v : values) {
    if (direction == Direction::Maximize ? v < guarantee : v > guarantee) ++bad;
  }
  return static_cast<double>(bad) / static_cast<double>(values.size());
}

std::string serialize_risk_bound(const RiskBound& b) {
  nlohmann::ordered_json j = {{"epsilon", b.epsilon}, {"K", b.K},         {"beta", b.beta}, {"N", b.N},
                              {"discarded", b.discarded}, {"gamma", b.gamma}, {"eta", b.eta}};
  return j.dump();
}

}  // namespace upmdp
