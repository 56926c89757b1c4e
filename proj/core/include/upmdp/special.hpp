#pragma once

#include <cstdint>

namespace upmdp {

// Inverse of the standard normal CDF. Requires 0 < p < 1.
double normal_quantile(double p);

double log_binomial_coefficient(std::int64_t n, std::int64_t k);

// P[X <= d] for X ~ Binomial(n, eps), through the incomplete beta function.
double binomial_cdf(std::int64_t d, std::int64_t n, double eps);

// P[X >= k] for X ~ Binomial(n, q).
double binomial_upper_tail(std::int64_t k, std::int64_t n, double q);

// Log-space summation of the binomial CDF term by term. Slower than
// binomial_cdf and kept as an independent cross-check.
double binomial_cdf_by_sum(std::int64_t d, std::int64_t n, double eps);

}  // namespace upmdp
