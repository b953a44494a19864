#pragma once

// Random variate generation. Everything is driven by one 64-bit Mersenne
// Twister per chain so that a seed reproduces a run bit-for-bit.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#include "bayeslink/errors.hpp"
#include "bayeslink/numeric.hpp"

namespace bayeslink {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Independent stream for replicate/chain `index`: seed xor index, then mixed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(seed ^ index);
}

// Uniform on [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::size_t uniform_index(std::size_t n, Rng& rng) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

// Index drawn with probability proportional to nonnegative `weights`.
inline std::size_t draw_categorical(std::span<const double> weights, Rng& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) throw InconsistentState("categorical draw with zero total weight");
  const double u = uniform01(rng) * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc) return i;
  }
  // Rounding at the top end: return the last positive weight.
  for (std::size_t i = weights.size(); i-- > 0;) {
    if (weights[i] > 0.0) return i;
  }
  return weights.size() - 1;
}

// pmf of the number of marked items in `draws` draws without replacement from a
// population of `pop` items of which `marked` are marked, over its support
// [lo, hi]. Returned vector is indexed by x - lo.
inline std::vector<double> hypergeometric_pmf(std::int64_t pop, std::int64_t marked,
                                              std::int64_t draws, std::int64_t& lo,
                                              std::int64_t& hi) {
  lo = std::max<std::int64_t>(0, marked + draws - pop);
  hi = std::min(marked, draws);
  if (pop < 0 || marked < 0 || draws < 0 || marked > pop || draws > pop || lo > hi) {
    throw InconsistentState("empty hypergeometric support (population " + std::to_string(pop) +
                            ", marked " + std::to_string(marked) + ", draws " +
                            std::to_string(draws) + ")");
  }
  std::vector<double> logp(static_cast<std::size_t>(hi - lo + 1));
  const double norm = log_choose(static_cast<double>(pop), static_cast<double>(draws));
  for (std::int64_t x = lo; x <= hi; ++x) {
    logp[static_cast<std::size_t>(x - lo)] =
        log_choose(static_cast<double>(marked), static_cast<double>(x)) +
        log_choose(static_cast<double>(pop - marked), static_cast<double>(draws - x)) - norm;
  }
  std::vector<double> p(logp.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::exp(logp[i]);
  return p;
}

inline std::int64_t draw_hypergeometric(std::int64_t pop, std::int64_t marked, std::int64_t draws,
                                        Rng& rng) {
  std::int64_t lo = 0;
  std::int64_t hi = 0;
  const auto p = hypergeometric_pmf(pop, marked, draws, lo, hi);
  if (lo == hi) return lo;
  return lo + static_cast<std::int64_t>(draw_categorical(p, rng));
}

inline double draw_gamma(double shape, Rng& rng) {
  return std::gamma_distribution<double>(shape, 1.0)(rng);
}

inline std::vector<double> draw_dirichlet(std::span<const double> alpha, Rng& rng) {
  std::vector<double> x(alpha.size());
  double s = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    x[i] = draw_gamma(alpha[i], rng);
    s += x[i];
  }
  if (!(s > 0.0)) {
    // Every gamma underflowed (tiny concentrations): fall back to the index of a
    // uniform pick among the components, the limiting point-mass behaviour.
    std::fill(x.begin(), x.end(), 0.0);
    x[draw_categorical(alpha, rng)] = 1.0;
    return x;
  }
  for (double& v : x) v /= s;
  return x;
}

// Beta(a, b) restricted to (lo, hi), drawn by inversion on the upper-tail
// incomplete beta function, which stays accurate when almost all the mass lies
// below `lo`.
inline double draw_truncated_beta(double a, double b, double lo, double hi, Rng& rng) {
  namespace bm = boost::math;
  const double s_lo = bm::ibetac(a, b, lo);
  const double s_hi = hi >= 1.0 ? 0.0 : bm::ibetac(a, b, hi);
  double u = uniform01(rng);
  while (u == 0.0) u = uniform01(rng);
  const double v = s_hi + u * (s_lo - s_hi);
  double x = v <= 0.0 ? hi : bm::ibetac_inv(a, b, v);
  return std::clamp(x, lo, hi);
}

// Multivariate hypergeometric style sampling without replacement: returns `m`
// distinct indices from [0, n) in random order.
inline std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t m,
                                                           Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + uniform_index(n - i, rng);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(m);
  return idx;
}

}  // namespace bayeslink
