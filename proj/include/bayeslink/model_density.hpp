#pragma once

// Closed-form log densities of the latent layer of the hierarchical model:
// true values (muA, muB), the matching matrix C, the per-cell match counts t and
// the finite population counts F. None of these are needed by the sampler's
// hot path; they exist so that the sampler's conditionals can be checked
// against the joint model and so the comparison-vector model can reuse p(C | N).

#include <cstdint>
#include <span>

#include "bayeslink/core.hpp"
#include "bayeslink/numeric.hpp"

namespace bayeslink {

namespace detail {

inline double log_multinomial_coeff(std::int64_t n, std::span<const std::int64_t> parts) {
  double r = log_factorial(static_cast<double>(n));
  std::int64_t s = 0;
  for (auto p : parts) {
    if (p < 0) return kNegInf;
    r -= log_factorial(static_cast<double>(p));
    s += p;
  }
  return s == n ? r : kNegInf;
}

}  // namespace detail

// p(mu^S | F) for one sample: SRS without replacement, ordered.
inline double log_p_mu_sample_given_F(const FrequencyVector& f, const FrequencyVector& F) {
  const std::int64_t n = f.total();
  const std::int64_t N = F.total();
  if (n > N) return kNegInf;
  double lp = -log_choose(static_cast<double>(N), static_cast<double>(n)) -
              log_factorial(static_cast<double>(n));
  for (const auto& [cell, count] : f) {
    const auto Fj = F[cell];
    if (count > Fj) return kNegInf;
    lp += log_factorial(static_cast<double>(count)) +
          log_choose(static_cast<double>(Fj), static_cast<double>(count));
  }
  return lp;
}

// p(muA, muB | F) = p(muA | F) p(muB | F).
inline double log_p_mu_given_F(std::span<const CellIndex> muA, std::span<const CellIndex> muB,
                               const FrequencyVector& F) {
  return log_p_mu_sample_given_F(frequencies(muA), F) +
         log_p_mu_sample_given_F(frequencies(muB), F);
}

// p(muA, muB | C, t, F). Zero unless every matched pair shares its true value
// and t is the per-cell tally of C.
inline double log_p_mu_given_CtF(std::span<const CellIndex> muA, std::span<const CellIndex> muB,
                                 const MatchingMatrix& C, const FrequencyVector& t,
                                 const FrequencyVector& F) {
  for (auto [a, b] : C.pairs()) {
    if (muA[a] != muB[b]) return kNegInf;
  }
  if (!(t_from(muA, muB, C) == t)) return kNegInf;
  const auto fA = frequencies(muA);
  const auto fB = frequencies(muB);
  const std::int64_t nA = fA.total();
  const std::int64_t nB = fB.total();
  const std::int64_t T = t.total();
  const std::int64_t N = F.total();

  double lp = 0.0;
  for (const auto& [cell, Fj] : F) {
    const std::int64_t tj = t[cell];
    const std::int64_t a = fA[cell];
    const std::int64_t b = fB[cell];
    if (std::min(a, b) < tj || std::max(a, b) > Fj) return kNegInf;
    const std::int64_t parts[] = {a - tj, b - tj, Fj - a - b + tj};
    lp += detail::log_multinomial_coeff(Fj - tj, parts);
    lp += log_factorial(static_cast<double>(tj)) + log_factorial(static_cast<double>(a - tj)) +
          log_factorial(static_cast<double>(b - tj));
  }
  // True values outside the support of F.
  for (const auto& [cell, a] : fA) {
    if (F[cell] == 0) return kNegInf;
  }
  for (const auto& [cell, b] : fB) {
    if (F[cell] == 0) return kNegInf;
  }
  const std::int64_t whole[] = {nA - T, nB - T, N - nA - nB + T};
  lp -= detail::log_multinomial_coeff(N - T, whole);
  lp -= log_factorial(static_cast<double>(T)) + log_factorial(static_cast<double>(nA - T)) +
        log_factorial(static_cast<double>(nB - T));
  return lp;
}

// p(C | t): uniform over the C(nA,T) C(nB,T) T! matchings with T pairs.
inline double log_p_C_given_T(std::int64_t T, std::int64_t nA, std::int64_t nB) {
  return -(log_choose(static_cast<double>(nA), static_cast<double>(T)) +
           log_choose(static_cast<double>(nB), static_cast<double>(T)) +
           log_factorial(static_cast<double>(T)));
}

// p(T | N): hypergeometric overlap of two SRS of sizes nA and nB.
inline double log_p_T_given_N(std::int64_t T, std::int64_t nA, std::int64_t nB, std::int64_t N) {
  const auto d = [](std::int64_t x) { return static_cast<double>(x); };
  return log_choose(d(nA), d(T)) + log_choose(d(N - nA), d(nB - T)) - log_choose(d(N), d(nB));
}

// p(t | F) = p(t | T, F) p(T | F): multivariate then scalar hypergeometric.
inline double log_p_t_given_F(const FrequencyVector& t, const FrequencyVector& F, std::int64_t nA,
                              std::int64_t nB) {
  const std::int64_t T = t.total();
  const std::int64_t N = F.total();
  double lp = -log_choose(static_cast<double>(N), static_cast<double>(T));
  for (const auto& [cell, tj] : t) {
    lp += log_choose(static_cast<double>(F[cell]), static_cast<double>(tj));
  }
  return lp + log_p_T_given_N(T, nA, nB, N);
}

// Full conditional of t given the true-value frequencies: independent
// hypergeometric counts per cell.
inline double log_p_t_given_mu_F(const FrequencyVector& t, const FrequencyVector& fA,
                                 const FrequencyVector& fB, const FrequencyVector& F) {
  double lp = 0.0;
  for (const auto& [cell, Fj] : F) {
    const auto a = static_cast<double>(fA[cell]);
    const auto b = static_cast<double>(fB[cell]);
    const auto tj = static_cast<double>(t[cell]);
    lp += log_choose(a, tj) + log_choose(static_cast<double>(Fj) - a, b - tj) -
          log_choose(static_cast<double>(Fj), b);
  }
  for (const auto& [cell, tj] : t) {
    if (F[cell] == 0) return kNegInf;
  }
  return lp;
}

}  // namespace bayeslink
