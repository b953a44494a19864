#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance runner: brute-force enumerations over tiny instances, empirical
// distances, and the Geweke joint-distribution check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#include "bayeslink/baselines.hpp"
#include "bayeslink/decision.hpp"
#include "bayeslink/model_density.hpp"
#include "bayeslink/numeric.hpp"
#include "bayeslink/popsize.hpp"
#include "bayeslink/random.hpp"
#include "bayeslink/sampler.hpp"

namespace oracle {

using namespace bayeslink;

inline double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

template <typename Key>
double total_variation(const std::map<Key, double>& p, const std::map<Key, double>& q) {
  std::map<Key, double> all = p;
  for (const auto& [k, v] : q) all[k];
  double s = 0.0;
  for (const auto& [k, v] : all) {
    auto a = p.find(k);
    auto b = q.find(k);
    s += std::abs((a == p.end() ? 0.0 : a->second) - (b == q.end() ? 0.0 : b->second));
  }
  return 0.5 * s;
}

// Kolmogorov-Smirnov distance between a sample and a continuous CDF.
template <typename Cdf>
double ks_statistic(std::vector<double> xs, Cdf cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, std::abs(f - static_cast<double>(i) / n), std::abs(static_cast<double>(i + 1) / n - f)});
  }
  return d;
}

inline std::vector<std::vector<CellIndex>> all_tuples(std::size_t n, std::uint64_t K) {
  std::vector<std::vector<CellIndex>> out;
  std::vector<CellIndex> cur(n, CellIndex{1});
  for (;;) {
    out.push_back(cur);
    std::size_t i = n;
    while (i > 0) {
      --i;
      if (cur[i].j < K) {
        ++cur[i].j;
        for (std::size_t r = i + 1; r < n; ++r) cur[r] = CellIndex{1};
        break;
      }
      if (i == 0) return out;
    }
    if (n == 0) return out;
  }
}

inline FrequencyVector freq_of(std::initializer_list<std::int64_t> counts) {
  FrequencyVector f;
  std::uint64_t j = 1;
  for (auto c : counts) f.add(CellIndex{j++}, c);
  return f;
}

// All t with the given total over K = 2 cells.
inline std::vector<FrequencyVector> t_vectors_k2(std::int64_t T) {
  std::vector<FrequencyVector> out;
  for (std::int64_t t1 = 0; t1 <= T; ++t1) out.push_back(freq_of({t1, T - t1}));
  return out;
}

struct IdentityErrors {
  double appendix_a_max_rel = 0.0;
  double appendix_b_max_abs = 0.0;
  std::size_t cases = 0;
};

// K = 2, nA = nB = 2, every F with N <= 6 and every (muA, muB).
inline IdentityErrors check_identities(std::int64_t n_max = 6) {
  IdentityErrors e;
  const auto samples = all_tuples(2, 2);
  const auto matchings = enumerate_matchings(2, 2);
  for (std::int64_t N = 2; N <= n_max; ++N) {
    for (std::int64_t F1 = 0; F1 <= N; ++F1) {
      const auto F = freq_of({F1, N - F1});
      for (const auto& muA : samples) {
        for (const auto& muB : samples) {
          ++e.cases;
          const double closed = std::exp(log_p_mu_given_F(muA, muB, F));
          double factored = 0.0;
          std::map<std::int64_t, double> by_t1;  // p(mu | t, F) p(t | F), keyed by t_1
          for (std::int64_t T = 0; T <= 2; ++T) {
            for (const auto& t : t_vectors_k2(T)) {
              const double pt = std::exp(log_p_t_given_F(t, F, 2, 2));
              double mu_given_t = 0.0;
              for (const auto& C : matchings) {
                if (static_cast<std::int64_t>(C.T()) != T) continue;
                const double lp = log_p_mu_given_CtF(muA, muB, C, t, F) + log_p_C_given_T(T, 2, 2);
                mu_given_t += std::exp(lp);
              }
              factored += mu_given_t * pt;
              if (mu_given_t * pt > 0.0) by_t1[t[CellIndex{1}] * 10 + t[CellIndex{2}]] += mu_given_t * pt;
            }
          }
          if (closed == 0.0) {
            e.appendix_a_max_rel = std::max(e.appendix_a_max_rel, factored);
            continue;
          }
          e.appendix_a_max_rel = std::max(e.appendix_a_max_rel, std::abs(factored - closed) / closed);

          // Normalized p(t | mu, F) against the product of hypergeometrics.
          const auto fA = frequencies(muA);
          const auto fB = frequencies(muB);
          double z = 0.0;
          for (const auto& [key, v] : by_t1) z += v;
          for (std::int64_t t1 = 0; t1 <= 2; ++t1) {
            for (std::int64_t t2 = 0; t1 + t2 <= 2; ++t2) {
              const auto t = freq_of({t1, t2});
              auto it = by_t1.find(t1 * 10 + t2);
              const double lhs = it == by_t1.end() ? 0.0 : it->second / z;
              const double rhs = std::exp(log_p_t_given_mu_F(t, fA, fB, F));
              e.appendix_b_max_abs = std::max(e.appendix_b_max_abs, std::abs(lhs - rhs));
            }
          }
        }
      }
    }
  }
  return e;
}

// ---------------------------------------------------------------------------
// Full conditionals on toy states

struct ToyMu {
  KeySchema schema{{4}};
  RecordTable xA;
  RecordTable xB;
  LatentState st;
  std::vector<double> exact;  // p(muA_0 = v_c | rest), c = 1..4
};

// K = 4, N = 5, nA = nB = 2.
inline ToyMu toy_mu_instance() {
  KeySchema schema({4});
  ToyMu toy{schema, RecordTable::from_rows(schema, {{2}, {3}}, 'A'),
            RecordTable::from_rows(schema, {{2}, {1}}, 'B'), {}, {}};
  auto& st = toy.st;
  st.muA = {CellIndex{1}, CellIndex{3}};
  st.muB = {CellIndex{2}, CellIndex{1}};
  st.fA = frequencies(st.muA);
  st.fB = frequencies(st.muB);
  st.F = freq_of({2, 1, 1, 1});
  st.N = 5;
  st.t = freq_of({1, 0, 0, 0});
  st.theta = ThetaBlocks::uniform(schema);
  st.betaA = {0.6};
  st.betaB = st.betaA;
  // Unit 0 of A: residual F_c - f_{c,-0} is (2, 1, 0, 1); observed code 2.
  const double residual[] = {2, 1, 0, 1};
  double z = 0.0;
  for (Code c = 1; c <= 4; ++c) {
    const double w = residual[c - 1] * component_prob(2, c, 0.6, 4);
    toy.exact.push_back(w);
    z += w;
  }
  for (auto& p : toy.exact) p /= z;
  return toy;
}

inline double check_update_mu_unit(std::uint64_t seed, std::size_t draws) {
  auto toy = toy_mu_instance();
  SamplerConfig cfg;
  HierarchicalSampler sampler(toy.schema, toy.xA, toy.xB, PriorConfig{}, cfg);
  Rng rng(seed);
  std::vector<double> freq(4, 0.0);
  for (std::size_t r = 0; r < draws; ++r) {
    LatentState st = toy.st;
    sampler.update_mu_unit(st, File::A, 0, rng);
    freq[st.muA[0].j - 1] += 1.0;
  }
  for (auto& f : freq) f /= static_cast<double>(draws);
  return total_variation(freq, toy.exact);
}

// One cell with F = 4, fA = fB = 2: t ~ (1/6, 4/6, 1/6).
inline double check_update_t(std::uint64_t seed, std::size_t draws) {
  KeySchema schema({2});
  const auto xA = RecordTable::from_rows(schema, {{1}, {1}}, 'A');
  const auto xB = RecordTable::from_rows(schema, {{1}, {1}}, 'B');
  HierarchicalSampler sampler(schema, xA, xB, PriorConfig{}, SamplerConfig{});
  LatentState st;
  st.muA = {CellIndex{1}, CellIndex{1}};
  st.muB = st.muA;
  st.fA = frequencies(st.muA);
  st.fB = st.fA;
  st.F = freq_of({4, 0});
  st.N = 4;
  Rng rng(seed);
  std::vector<double> freq(3, 0.0);
  for (std::size_t r = 0; r < draws; ++r) {
    sampler.update_t(st, rng);
    freq[static_cast<std::size_t>(st.t[CellIndex{1}])] += 1.0;
  }
  for (auto& f : freq) f /= static_cast<double>(draws);
  return total_variation(freq, {1.0 / 6, 4.0 / 6, 1.0 / 6});
}

// |A_j| = |B_j| = 2 and t_j = 1: four equally likely single-pair matchings.
inline double check_draw_C(std::uint64_t seed, std::size_t draws) {
  KeySchema schema({2});
  const auto xA = RecordTable::from_rows(schema, {{1}, {2}, {1}}, 'A');
  const auto xB = RecordTable::from_rows(schema, {{1}, {1}, {2}}, 'B');
  HierarchicalSampler sampler(schema, xA, xB, PriorConfig{}, SamplerConfig{});
  LatentState st;
  st.muA = {CellIndex{1}, CellIndex{2}, CellIndex{1}};
  st.muB = {CellIndex{1}, CellIndex{1}, CellIndex{2}};
  st.fA = frequencies(st.muA);
  st.fB = frequencies(st.muB);
  st.t = freq_of({1, 0});
  st.F = freq_of({4, 2});
  st.N = 6;
  Rng rng(seed);
  std::map<std::vector<Pair>, double> freq;
  for (std::size_t r = 0; r < draws; ++r) freq[sampler.draw_C(st, rng).pairs()] += 1.0;
  for (auto& [k, v] : freq) v /= static_cast<double>(draws);
  std::map<std::vector<Pair>, double> exact;
  for (std::size_t a : {0, 2}) {
    for (std::size_t b : {0, 1}) exact[{{a, b}}] = 0.25;
  }
  return total_variation(freq, exact);
}

// CDF of beta = (k eta - 1)/(k - 1) with eta ~ Beta(a, b) truncated to (1/k, 1).
inline double truncated_beta_cdf(double beta, double a, double b, double k) {
  const double lo = boost::math::ibeta(a, b, 1.0 / k);
  const double eta = (beta * (k - 1.0) + 1.0) / k;
  return (boost::math::ibeta(a, b, eta) - lo) / (1.0 - lo);
}

struct BetaCheck {
  double ks = 0.0;
  double hits = 0.0;
  double n = 0.0;
  double k = 0.0;
};

// Three of four units hit on a k = 3 variable.
inline BetaCheck check_update_beta(std::uint64_t seed, std::size_t draws) {
  KeySchema schema({3});
  const auto xA = RecordTable::from_rows(schema, {{1}, {2}}, 'A');
  const auto xB = RecordTable::from_rows(schema, {{3}, {1}}, 'B');
  HierarchicalSampler sampler(schema, xA, xB, PriorConfig{}, SamplerConfig{});
  LatentState st;
  st.muA = {CellIndex{1}, CellIndex{2}};
  st.muB = {CellIndex{3}, CellIndex{2}};
  st.betaA = {0.5};
  st.betaB = st.betaA;
  Rng rng(seed);
  std::vector<double> xs;
  xs.reserve(draws);
  for (std::size_t r = 0; r < draws; ++r) {
    sampler.update_beta(st, rng);
    xs.push_back(st.betaA[0]);
  }
  BetaCheck out{0.0, 3.0, 4.0, 3.0};
  out.ks = ks_statistic(xs, [&](double b) { return truncated_beta_cdf(b, 4.0, 2.0, 3.0); });
  return out;
}

// ---------------------------------------------------------------------------
// Geweke: marginal-conditional vs successive-conditional simulators

struct GewekeResult {
  std::vector<std::string> names;
  std::vector<double> z;  // standardized moment differences
  double max_abs_z() const {
    double m = 0.0;
    for (double v : z) m = std::max(m, std::abs(v));
    return m;
  }
};

struct GewekeToy {
  KeySchema schema{{4}};
  std::int64_t nA = 3;
  std::int64_t nB = 3;
  PriorConfig prior;

  GewekeToy() {
    prior.g = 2.0;
    prior.n_cap = 12;
  }

  std::vector<double> n_prior() const {
    std::vector<double> w;
    for (std::int64_t N = std::max(nA, nB); N <= *prior.n_cap; ++N) w.push_back(std::exp(prior.log_prior(N)));
    return w;
  }

  // Parameters and true values from the prior, then T.
  LatentState draw_latent(Rng& rng) const {
    LatentState st;
    const auto w = n_prior();
    st.N = std::max(nA, nB) + static_cast<std::int64_t>(draw_categorical(w, rng));
    std::vector<double> alpha(schema.K(), 1.0);
    st.theta = ThetaBlocks::from_tables({draw_dirichlet(alpha, rng)});
    std::vector<CellIndex> pop;
    for (std::int64_t u = 0; u < st.N; ++u) {
      const auto c = st.theta.draw_cell(schema, rng);
      pop.push_back(c);
      st.F.add(c);
    }
    const auto ua = sample_without_replacement(pop.size(), static_cast<std::size_t>(nA), rng);
    const auto ub = sample_without_replacement(pop.size(), static_cast<std::size_t>(nB), rng);
    for (auto u : ua) st.muA.push_back(pop[u]);
    for (auto u : ub) st.muB.push_back(pop[u]);
    st.fA = frequencies(st.muA);
    st.fB = frequencies(st.muB);
    for (auto u : ua) {
      if (std::find(ub.begin(), ub.end(), u) != ub.end()) st.t.add(pop[u]);
    }
    st.betaA = {uniform01(rng)};
    st.betaB = st.betaA;
    return st;
  }

  RecordTable observe(const std::vector<CellIndex>& mu, double beta, char label, Rng& rng) const {
    std::vector<Code> codes;
    for (auto c : mu) {
      const Code m = schema.code_at(c, 0);
      codes.push_back(uniform01(rng) < beta ? m : static_cast<Code>(1 + uniform_index(schema.k(0), rng)));
    }
    return RecordTable(schema, codes, label);
  }
};

inline std::vector<double> geweke_stats(const LatentState& st) {
  const double N = static_cast<double>(st.N);
  const double T = static_cast<double>(st.T());
  const double b = st.betaA[0];
  return {N, T, b, N * N, T * T, b * b};
}

inline GewekeResult geweke(std::uint64_t seed, std::size_t marginal_draws, std::size_t successive_steps) {
  GewekeToy toy;
  GewekeResult out;
  out.names = {"N", "T", "beta", "N^2", "T^2", "beta^2"};
  const std::size_t m = out.names.size();

  Rng rng(seed);
  std::vector<std::vector<double>> marg(m), succ(m);
  for (std::size_t r = 0; r < marginal_draws; ++r) {
    const auto st = toy.draw_latent(rng);
    const auto s = geweke_stats(st);
    for (std::size_t k = 0; k < m; ++k) marg[k].push_back(s[k]);
  }

  SamplerConfig cfg;
  cfg.inner_sweeps = 1;
  auto st = toy.draw_latent(rng);
  HierarchicalSampler sampler(toy.schema, toy.observe(st.muA, st.betaA[0], 'A', rng),
                              toy.observe(st.muB, st.betaA[0], 'B', rng), toy.prior, cfg);
  for (std::size_t r = 0; r < successive_steps; ++r) {
    sampler.step(st, rng);
    sampler.set_observations(toy.observe(st.muA, st.betaA[0], 'A', rng),
                             toy.observe(st.muB, st.betaA[0], 'B', rng));
    const auto s = geweke_stats(st);
    for (std::size_t k = 0; k < m; ++k) succ[k].push_back(s[k]);
  }

  for (std::size_t k = 0; k < m; ++k) {
    const auto a = mean_and_se(marg[k]);
    const auto b = batch_means(succ[k], 100);
    out.z.push_back((a.mean - b.mean) / std::sqrt(a.se * a.se + b.se * b.se));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Theorem 1 on random 3 x 3 posteriors

struct Theorem1Result {
  std::size_t checked = 0;
  std::size_t excluded = 0;
  std::size_t mismatches = 0;
  std::size_t abs_mismatches = 0;
  std::size_t fmr_violations = 0;
};

inline double expected_loss(LossKind kind, const std::vector<MatchingMatrix>& support,
                            const std::vector<double>& probs, const MatchingMatrix& G) {
  double s = 0.0;
  for (std::size_t i = 0; i < support.size(); ++i) s += probs[i] * loss(kind, support[i], G);
  return s;
}

inline Theorem1Result theorem1(std::uint64_t seed, std::size_t count) {
  Theorem1Result out;
  Rng rng(seed);
  const auto all = enumerate_matchings(3, 3);
  std::vector<double> alpha(all.size(), 0.3);
  while (out.checked < count) {
    const auto w = draw_dirichlet(alpha, rng);
    PairPosterior post{3, 3, {}};
    for (std::size_t i = 0; i < all.size(); ++i) {
      for (auto ab : all[i].pairs()) post.probs[ab] += w[i];
    }
    const bool near = std::any_of(post.probs.begin(), post.probs.end(),
                                  [](const auto& kv) { return kv.second >= 0.45 && kv.second <= 0.55; });
    if (std::abs(expected_loss(LossKind::fmr, all, w, MatchingMatrix(3, 3))) > 0.0) ++out.fmr_violations;
    if (near) {
      ++out.excluded;
      continue;
    }
    ++out.checked;
    auto best = [&](LossKind kind) {
      std::size_t arg = 0;
      double v = 1e300;
      for (std::size_t g = 0; g < all.size(); ++g) {
        const double e = expected_loss(kind, all, w, all[g]);
        if (e < v - 1e-12) {
          v = e;
          arg = g;
        }
      }
      return all[arg];
    };
    const auto G = bayes_estimate(post).G;
    if (!(best(LossKind::quadratic) == G)) ++out.mismatches;
    if (!(best(LossKind::abs) == G)) ++out.abs_mismatches;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Jaro constrained model on a 2 x 2 instance: exact posterior over C

inline std::map<std::vector<Pair>, double> jaro_exact_posterior(const ComparisonData& d, const PriorConfig& prior) {
  std::map<std::vector<Pair>, double> post;
  const auto nA = static_cast<std::int64_t>(d.nA);
  const auto nB = static_cast<std::int64_t>(d.nB);
  const auto P = static_cast<double>(d.pairs());
  std::vector<double> agree_total(d.h, 0.0);
  for (std::size_t a = 0; a < d.nA; ++a) {
    for (std::size_t b = 0; b < d.nB; ++b) {
      for (std::size_t i = 0; i < d.h; ++i) agree_total[i] += pattern_bit(d.at(a, b), i);
    }
  }
  auto log_beta_fn = [](double x, double y) { return std::lgamma(x) + std::lgamma(y) - std::lgamma(x + y); };
  double z = 0.0;
  for (const auto& C : enumerate_matchings(d.nA, d.nB)) {
    const auto T = static_cast<std::int64_t>(C.T());
    double pc = 0.0;  // sum over N of p(C | N) p(N)
    for (std::int64_t N = std::max(nA, nB); N <= *prior.n_cap; ++N) {
      pc += std::exp(log_p_C_given_T(T, nA, nB) + log_p_T_given_N(T, nA, nB, N) + prior.log_prior(N));
    }
    double lik = 0.0;
    for (std::size_t i = 0; i < d.h; ++i) {
      double a = 0.0;
      for (auto [x, y] : C.pairs()) a += pattern_bit(d.at(x, y), i);
      const double t = static_cast<double>(T);
      lik += log_beta_fn(1.0 + a, 1.0 + t - a);
      lik += log_beta_fn(1.0 + agree_total[i] - a, 1.0 + (P - t) - (agree_total[i] - a));
    }
    const double v = pc * std::exp(lik);
    post[C.pairs()] = v;
    z += v;
  }
  for (auto& [k, v] : post) v /= z;
  return post;
}

}  // namespace oracle
