#include "upmdp/special.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/beta.hpp>

#include "upmdp/error.hpp"

namespace upmdp {

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ValidationError("normal_quantile needs 0 < p < 1");
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double log_binomial_coefficient(std::int64_t n, std::int64_t k) {
  if (k < 0 || k > n) return -std::numeric_limits<double>::infinity();
  const double nn = static_cast<double>(n);
  const double kk = static_cast<double>(k);
  return std::lgamma(nn + 1.0) - std::lgamma(kk + 1.0) - std::lgamma(nn - kk + 1.0);
}

namespace {

// log of sum_{i=lo}^{hi} C(n,i) q^i (1-q)^(n-i), with 0 < q < 1.
double log_binomial_range(std::int64_t lo, std::int64_t hi, std::int64_t n, double q) {
  const double lq = std::log(q);
  const double l1q = std::log1p(-q);
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(hi - lo + 1));
  double mx = -std::numeric_limits<double>::infinity();
  for (std::int64_t i = lo; i <= hi; ++i) {
    const double t = log_binomial_coefficient(n, i) + static_cast<double>(i) * lq + static_cast<double>(n - i) * l1q;
    terms.push_back(t);
    mx = std::max(mx, t);
  }
  if (!std::isfinite(mx)) return mx;
  // Neumaier-compensated sum of the rescaled terms.
  double sum = 0.0;
  double comp = 0.0;
  for (double t : terms) {
    const double x = std::exp(t - mx);
    const double s = sum + x;
    comp += std::abs(sum) >= std::abs(x) ? (sum - s) + x : (x - s) + sum;
    sum = s;
  }
  return mx + std::log(sum + comp);
}

}  // namespace

double binomial_cdf_by_sum(std::int64_t d, std::int64_t n, double eps) {
  if (n < 0) throw ValidationError("binomial: negative n");
  if (d < 0) return 0.0;
  if (d >= n) return 1.0;
  if (eps <= 0.0) return 1.0;
  if (eps >= 1.0) return 0.0;
  return std::min(1.0, std::exp(log_binomial_range(0, d, n, eps)));
}

double binomial_cdf(std::int64_t d, std::int64_t n, double eps) {
  if (n < 0) throw ValidationError("binomial: negative n");
  if (d < 0) return 0.0;
  if (d >= n) return 1.0;
  if (eps <= 0.0) return 1.0;
  if (eps >= 1.0) return 0.0;
  return boost::math::ibetac(static_cast<double>(d + 1), static_cast<double>(n - d), eps);
}

double binomial_upper_tail(std::int64_t k, std::int64_t n, double q) {
  if (k <= 0) return 1.0;
  if (k > n) return 0.0;
  if (q <= 0.0) return 0.0;
  if (q >= 1.0) return 1.0;
  return boost::math::ibeta(static_cast<double>(k), static_cast<double>(n - k + 1), q);
}

}  // namespace upmdp
