#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace bayeslink {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double log_factorial(double n) { return std::lgamma(n + 1.0); }

// log C(n, k); -inf outside 0 <= k <= n.
inline double log_choose(double n, double k) {
  if (k < 0 || n < 0 || k > n) return kNegInf;
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

// lgamma(x + a) - lgamma(x + b) without the cancellation of the direct
// difference at large x (Stirling series for both terms).
inline double log_gamma_ratio(double x, double a, double b) {
  const double y1 = x + a;
  const double y2 = x + b;
  if (std::min(y1, y2) < 64.0) return std::lgamma(y1) - std::lgamma(y2);
  auto series = [](double y) {
    const double r = 1.0 / y, r2 = r * r;
    return r * (1.0 / 12 - r2 * (1.0 / 360 - r2 * (1.0 / 1260 - r2 / 1680)));
  };
  const double d = a - b;
  return (y2 - 0.5) * std::log1p(d / y2) + d * std::log(y1) - d + series(y1) - series(y2);
}

inline double log_sum_exp(std::span<const double> xs) {
  double m = kNegInf;
  for (double x : xs) m = std::max(m, x);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

// Smallest element x of `sorted` whose empirical CDF reaches p.
template <typename T>
T empirical_quantile(std::span<const T> sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile of an empty sample");
  const double n = static_cast<double>(sorted.size());
  auto idx = static_cast<std::size_t>(std::ceil(p * n - 1e-9));
  if (idx > 0) --idx;
  return sorted[std::min(idx, sorted.size() - 1)];
}

struct MeanAndError {
  double mean = 0.0;
  double se = 0.0;  // standard error of the mean
};

inline MeanAndError mean_and_se(std::span<const double> xs) {
  MeanAndError out;
  if (xs.empty()) return out;
  double s = 0.0;
  for (double x : xs) s += x;
  out.mean = s / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.se = std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
  }
  return out;
}

// Mean with a batch-means standard error, for autocorrelated MCMC output.
inline MeanAndError batch_means(std::span<const double> xs, std::size_t batches = 50) {
  MeanAndError out;
  if (xs.empty()) return out;
  batches = std::max<std::size_t>(2, std::min(batches, xs.size()));
  const std::size_t len = xs.size() / batches;
  std::vector<double> means;
  for (std::size_t b = 0; b < batches; ++b) {
    double s = 0.0;
    for (std::size_t i = b * len; i < (b + 1) * len; ++i) s += xs[i];
    means.push_back(s / static_cast<double>(len));
  }
  out = mean_and_se(means);
  return out;
}

}  // namespace bayeslink
