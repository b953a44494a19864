#pragma once

// Posterior of the population size N given the number T of units common to two
// samples of fixed sizes nA and nB:
//
//   p(N | T) ∝ C(nA, T) C(N - nA, nB - T) / C(N, nB) · prior(N),  N >= nA + nB - T.
//
// The pmf is evaluated in log space and accumulated from the bottom of its
// support until a tail bound certifies that the unvisited mass is below a
// tolerance, so inverse-CDF draws are exact to that tolerance without an
// arbitrary upper limit on N. Heavy tails (few matches, weak prior) switch to
// log-spaced bins after a fixed number of explicit points.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "bayeslink/errors.hpp"
#include "bayeslink/numeric.hpp"
#include "bayeslink/random.hpp"

namespace bayeslink {

enum class NPriorForm {
  gamma_form,     // p_g(N) ∝ Γ(N - g + 1) / N!
  inverse_square  // p(N) ∝ 1 / N^2
};

struct PriorConfig {
  double g = 2.0;
  NPriorForm n_prior_form = NPriorForm::gamma_form;
  // Multiply the prior by (N + 1)^-2 (uniform prior on random capture probabilities).
  bool capture_prior_factor = false;
  // Optional hard upper limit on N; makes any prior proper.
  std::optional<std::int64_t> n_cap;
  // Per Dirichlet block concentration vectors; an empty entry means every
  // concentration equals `dirichlet_default`.
  std::vector<std::vector<double>> dirichlet_hyper;
  double dirichlet_default = 1.0;

  void validate() const {
    if (!(g >= 0.0)) throw ConfigError("prior hyperparameter g must be >= 0");
    if (!(dirichlet_default > 0.0)) throw ConfigError("Dirichlet concentrations must be > 0");
    for (const auto& block : dirichlet_hyper) {
      for (double a : block) {
        if (!(a > 0.0)) throw ConfigError("Dirichlet concentrations must be > 0");
      }
    }
  }

  double log_prior(std::int64_t N) const { return log_prior_at(static_cast<double>(N)); }

  // Same expression for real n, used when integrating over the far tail.
  double log_prior_at(double n) const {
    if (n_cap && n > static_cast<double>(*n_cap)) return kNegInf;
    double lp = 0.0;
    if (n_prior_form == NPriorForm::gamma_form) {
      if (n - g + 1.0 <= 0.0) return kNegInf;
      lp = log_gamma_ratio(n, 1.0 - g, 1.0);
    } else {
      lp = -2.0 * std::log(n);
    }
    if (capture_prior_factor) lp -= 2.0 * std::log(n + 1.0);
    return lp;
  }

  // log prior(N + 1) - log prior(N), for N inside the support.
  double log_prior_step(double n) const {
    double r = n_prior_form == NPriorForm::gamma_form ? std::log1p(-g / (n + 1.0))
                                                      : -2.0 * std::log1p(1.0 / n);
    if (capture_prior_factor) r -= 2.0 * std::log1p(1.0 / (n + 1.0));
    return r;
  }

  // Exponent alpha with prior(N) ~ N^-alpha for large N.
  double prior_tail_exponent() const {
    double a = n_prior_form == NPriorForm::gamma_form ? g : 2.0;
    if (capture_prior_factor) a += 2.0;
    return a;
  }
};

// Far-tail segment [lo, hi] of an IntegerPmf, summarized by its mass.
struct PmfTailBin {
  std::int64_t lo = 0;
  std::int64_t hi = 0;
  double mass = 0.0;
  double cdf = 0.0;  // cumulative through hi
};

// A pmf over the integers first, first+1, ...: explicit probabilities for
// first..first+size-1, then (for heavy tails) log-spaced bins whose members are
// evaluated on demand through `log_prob_at`.
struct IntegerPmf {
  std::int64_t first = 0;
  std::vector<double> pmf;
  std::vector<double> cdf;
  std::vector<PmfTailBin> tail;
  std::function<double(double)> log_prob_at;  // normalized log pmf, tail only
  double tail_mean = 0.0;                     // sum over the tail of x p(x)

  std::int64_t last_explicit() const { return first + static_cast<std::int64_t>(pmf.size()) - 1; }
  std::int64_t last() const { return tail.empty() ? last_explicit() : tail.back().hi; }

  double prob(std::int64_t x) const {
    if (x < first || x > last()) return 0.0;
    if (x <= last_explicit()) return pmf[static_cast<std::size_t>(x - first)];
    return std::exp(log_prob_at(static_cast<double>(x)));
  }

  double mean() const {
    double m = 0.0;
    for (std::size_t i = 0; i < pmf.size(); ++i) m += pmf[i] * static_cast<double>(first + i);
    return m + tail_mean;
  }

  // Smallest x with CDF(x) >= p.
  std::int64_t quantile(double p) const {
    auto it = std::lower_bound(cdf.begin(), cdf.end(), p - 1e-15);
    if (it != cdf.end() || tail.empty()) {
      if (it == cdf.end()) return last();
      return first + static_cast<std::int64_t>(it - cdf.begin());
    }
    auto bin = std::lower_bound(tail.begin(), tail.end(), p - 1e-15,
                                [](const PmfTailBin& b, double v) { return b.cdf < v; });
    if (bin == tail.end()) return last();
    const double before = bin->cdf - bin->mass;
    // Bisection on the partial bin mass.
    std::int64_t lo = bin->lo, hi = bin->hi;
    while (lo < hi) {
      const std::int64_t mid = lo + (hi - lo) / 2;
      if (before + tail_integral(static_cast<double>(bin->lo), static_cast<double>(mid)) >= p - 1e-15) {
        hi = mid;
      } else {
        lo = mid + 1;
      }
    }
    return lo;
  }

  std::int64_t sample(Rng& rng) const {
    const double u = uniform01(rng);
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    if (it != cdf.end()) return first + static_cast<std::int64_t>(it - cdf.begin());
    if (tail.empty()) return last();
    auto bin = std::upper_bound(tail.begin(), tail.end(), u,
                                [](double v, const PmfTailBin& b) { return v < b.cdf; });
    if (bin == tail.end()) --bin;
    // Rejection from the uniform on the bin; the pmf is decreasing there.
    const double top = log_prob_at(static_cast<double>(bin->lo));
    const auto width = static_cast<std::uint64_t>(bin->hi - bin->lo + 1);
    for (;;) {
      const std::int64_t x = bin->lo + static_cast<std::int64_t>(uniform_index(width, rng));
      if (std::log(uniform01(rng)) <= log_prob_at(static_cast<double>(x)) - top) return x;
    }
  }

  // Sum of p over the integers lo..hi, both in the tail.
  double tail_integral(double lo, double hi) const {
    return integrate_tail(log_prob_at, lo, hi, false);
  }

  // Midpoint-rule identification of a sum with an integral; the summand is
  // smooth and slowly varying this far out.
  static double integrate_tail(const std::function<double(double)>& logf, double lo, double hi,
                               bool first_moment) {
    auto f = [&](double x) {
      const double v = std::exp(logf(x));
      return first_moment ? x * v : v;
    };
    return boost::math::quadrature::gauss<double, 30>::integrate(f, lo - 0.5, hi + 0.5);
  }
};

// Points enumerated one by one before the tail switches to bins.
inline constexpr std::int64_t kExplicitNSupport = 200'000;
// Relative width of each tail bin.
inline constexpr double kTailBinGrowth = 1.01;

// Unnormalized log p(N | T), for real N so the tail can be integrated.
inline double log_n_posterior_kernel_at(double n, std::int64_t T, std::int64_t nA, std::int64_t nB,
                                        const PriorConfig& prior) {
  if (n < static_cast<double>(nA + nB - T) || n < static_cast<double>(std::max(nA, nB))) return kNegInf;
  const auto a = static_cast<double>(nA);
  const auto b = static_cast<double>(nB);
  const auto m = static_cast<double>(nB - T);
  // C(n - nA, nB - T) / C(n, nB) as ratios of gamma functions
  return log_gamma_ratio(n, 1.0 - a, 1.0 - a - m) - std::lgamma(m + 1.0) -
         log_gamma_ratio(n, 1.0, 1.0 - b) + std::lgamma(b + 1.0) + prior.log_prior_at(n);
}

// log p(N + 1 | T) - log p(N | T) from the exact one-step ratio.
inline double log_n_posterior_step(double n, std::int64_t T, std::int64_t nA, std::int64_t nB,
                                   const PriorConfig& prior) {
  const auto a = static_cast<double>(nA);
  const auto b = static_cast<double>(nB);
  const auto m = static_cast<double>(nB - T);
  return std::log1p(m / (n + 1.0 - a - m)) - std::log1p(b / (n + 1.0 - b)) + prior.log_prior_step(n);
}

inline double log_n_posterior_kernel(std::int64_t N, std::int64_t T, std::int64_t nA,
                                     std::int64_t nB, const PriorConfig& prior) {
  return log_n_posterior_kernel_at(static_cast<double>(N), T, nA, nB, prior);
}

// Exact (to `epsilon` of tail mass) posterior pmf of N given T.
inline IntegerPmf n_posterior(std::int64_t T, std::int64_t nA, std::int64_t nB,
                              const PriorConfig& prior, double epsilon = 1e-12) {
  if (T < 0 || T > std::min(nA, nB)) {
    throw InconsistentState("match count " + std::to_string(T) + " outside [0, min(nA, nB)]");
  }
  const double alpha = static_cast<double>(T) + prior.prior_tail_exponent();
  if (!prior.n_cap && alpha <= 1.0) {
    throw NonIntegrablePosterior("p(N | T) has tail ~ N^-" + std::to_string(alpha) +
                                 " (T = " + std::to_string(T) + ", prior exponent " +
                                 std::to_string(prior.prior_tail_exponent()) +
                                 "), which is not summable");
  }
  // Bound uses the exponent halfway between 1 and the asymptotic one, so that
  // N^a · p(N) is decreasing from modest N onward.
  const double a_bound = 0.5 * (1.0 + alpha);
  auto kernel = [&](double n) { return log_n_posterior_kernel_at(n, T, nA, nB, prior); };

  IntegerPmf out;
  out.first = std::max(nA + nB - T, std::max<std::int64_t>(std::max(nA, nB), 1));
  std::vector<double> logp;
  double log_max = kNegInf;
  double scaled_sum = 0.0;  // sum of exp(logp - log_max)

  auto tail_bound_holds = [&](double N) {
    // N^a p(N) nonincreasing on a geometric ladder of test points beyond N.
    for (double M = N; M < N * 1048576.0; M *= 2) {
      const double r = log_n_posterior_step(M, T, nA, nB, prior);
      if (r + a_bound * std::log1p(1.0 / M) > 0.0) return false;
    }
    return true;
  };
  // tail beyond N <= p(N) * N / (a - 1) once N^a p(N) is nonincreasing there.
  auto tail_negligible = [&](double N, double lp) {
    const double log_tail = lp + std::log(N) - std::log(a_bound - 1.0);
    return log_tail - log_max - std::log(scaled_sum) < std::log(epsilon) && tail_bound_holds(N);
  };

  bool need_tail = false;
  for (std::int64_t N = out.first;; ++N) {
    if (prior.n_cap && N > *prior.n_cap) break;
    const double lp = kernel(static_cast<double>(N));
    if (N - out.first >= kExplicitNSupport && lp < logp.back()) {
      need_tail = true;
      break;
    }
    logp.push_back(lp);
    if (lp > log_max) {
      scaled_sum = scaled_sum * std::exp(log_max - lp) + 1.0;
      log_max = lp;
    } else {
      scaled_sum += std::exp(lp - log_max);
    }
    if (prior.n_cap || lp == kNegInf || logp.size() < 2) continue;
    if (lp >= logp[logp.size() - 2]) continue;  // still rising: ratio >= 1
    if (tail_negligible(static_cast<double>(N), lp)) break;
  }
  if (log_max == kNegInf) {
    throw NonIntegrablePosterior("p(N | T) has no mass on its support");
  }

  // Heavy tail: log-spaced bins until the remainder is negligible or the cap is hit.
  std::vector<PmfTailBin> bins;
  std::vector<double> bin_mean;
  if (need_tail) {
    auto scaled = [&](double n) { return kernel(n) - log_max; };
    std::int64_t lo = out.first + static_cast<std::int64_t>(logp.size());
    for (;;) {
      if (prior.n_cap && lo > *prior.n_cap) break;
      if (static_cast<double>(lo) > 4.5e15) {
        throw NonIntegrablePosterior("tail of p(N | T = " + std::to_string(T) +
                                     ") did not fall below tolerance before N = 4.5e15");
      }
      std::int64_t hi = std::max(lo, static_cast<std::int64_t>(static_cast<double>(lo) * kTailBinGrowth));
      if (prior.n_cap) hi = std::min(hi, *prior.n_cap);
      PmfTailBin bin{lo, hi, IntegerPmf::integrate_tail(scaled, static_cast<double>(lo),
                                                        static_cast<double>(hi), false), 0.0};
      bins.push_back(bin);
      bin_mean.push_back(IntegerPmf::integrate_tail(scaled, static_cast<double>(lo), static_cast<double>(hi), true));
      scaled_sum += bin.mass;
      lo = hi + 1;
      if (!prior.n_cap && tail_negligible(static_cast<double>(hi), kernel(static_cast<double>(hi)))) break;
    }
  }

  out.pmf.resize(logp.size());
  for (std::size_t i = 0; i < logp.size(); ++i) out.pmf[i] = std::exp(logp[i] - log_max) / scaled_sum;
  out.cdf.resize(out.pmf.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < out.pmf.size(); ++i) {
    acc += out.pmf[i];
    out.cdf[i] = acc;
  }
  if (bins.empty()) {
    out.cdf.back() = 1.0;
    return out;
  }
  const double log_norm = log_max + std::log(scaled_sum);
  for (std::size_t b = 0; b < bins.size(); ++b) {
    bins[b].mass /= scaled_sum;
    acc += bins[b].mass;
    bins[b].cdf = acc;
    out.tail_mean += bin_mean[b] / scaled_sum;
  }
  bins.back().cdf = 1.0;
  out.tail = std::move(bins);
  out.log_prob_at = [kernel_copy = std::function<double(double)>(
                         [T, nA, nB, prior](double n) { return log_n_posterior_kernel_at(n, T, nA, nB, prior); }),
                     log_norm](double n) { return kernel_copy(n) - log_norm; };
  return out;
}

inline std::int64_t sample_N(std::int64_t T, std::int64_t nA, std::int64_t nB,
                             const PriorConfig& prior, double epsilon, Rng& rng) {
  return n_posterior(T, nA, nB, prior, epsilon).sample(rng);
}

// (nA + 1)(nB + 1) / (T + 1), the small-block fallback for N.
inline double chapman_estimate(double nA, double nB, double T) {
  return (nA + 1.0) * (nB + 1.0) / (T + 1.0);
}

}  // namespace bayeslink
