#pragma once

// Comparison-vector baselines: the two-component Bernoulli mixture fitted by EM,
// likelihood-ratio scoring, one-to-one assignment of declared matches, the
// "Jaro constrained" Bayesian chain on comparison vectors, the plug-in
// (hybrid) population posterior and the small-block fallback.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bayeslink/assignment.hpp"
#include "bayeslink/core.hpp"
#include "bayeslink/draws.hpp"
#include "bayeslink/errors.hpp"
#include "bayeslink/model_density.hpp"
#include "bayeslink/numeric.hpp"
#include "bayeslink/popsize.hpp"
#include "bayeslink/random.hpp"

namespace bayeslink {

// Bit i set iff field i agrees.
using Pattern = std::uint32_t;

inline bool pattern_bit(Pattern y, std::size_t i) { return ((y >> i) & 1U) != 0; }

// "(1,0,1)" with field 1 first.
inline std::string format_pattern(Pattern y, std::size_t h) {
  std::string s = "(";
  for (std::size_t i = 0; i < h; ++i) {
    if (i) s += ',';
    s += pattern_bit(y, i) ? '1' : '0';
  }
  return s + ")";
}

struct ComparisonData {
  std::size_t h = 0;
  std::size_t nA = 0;
  std::size_t nB = 0;
  std::map<Pattern, std::uint64_t> counts;
  std::vector<Pattern> patterns;  // row-major nA x nB

  Pattern at(std::size_t a, std::size_t b) const { return patterns[a * nB + b]; }
  std::uint64_t pairs() const { return static_cast<std::uint64_t>(nA) * nB; }

  static ComparisonData from_patterns(std::size_t h, std::size_t nA, std::size_t nB,
                                      std::vector<Pattern> patterns) {
    if (h == 0 || h > 32) throw SchemaError("comparison vectors need 1..32 fields");
    if (patterns.size() != nA * nB) throw DimensionMismatch("need one pattern per pair");
    ComparisonData d;
    d.h = h;
    d.nA = nA;
    d.nB = nB;
    for (Pattern y : patterns) {
      if (h < 32 && (y >> h) != 0) throw SchemaError("pattern has bits beyond h fields");
      ++d.counts[y];
    }
    d.patterns = std::move(patterns);
    return d;
  }
};

inline ComparisonData build_comparisons(const RecordTable& xA, const RecordTable& xB,
                                        const KeySchema& schema) {
  if (xA.h() != schema.h() || xB.h() != schema.h()) {
    throw SchemaError("record tables do not conform to the schema");
  }
  std::vector<Pattern> ys(xA.n() * xB.n());
  for (std::size_t a = 0; a < xA.n(); ++a) {
    for (std::size_t b = 0; b < xB.n(); ++b) {
      Pattern y = 0;
      for (std::size_t i = 0; i < schema.h(); ++i) {
        if (xA.at(a, i) == xB.at(b, i)) y |= Pattern{1} << i;
      }
      ys[a * xB.n() + b] = y;
    }
  }
  return ComparisonData::from_patterns(schema.h(), xA.n(), xB.n(), std::move(ys));
}

struct MixtureParams {
  double w = 0.0;
  std::vector<double> m;
  std::vector<double> u;
};

// m_i = 0.9, u_i = empirical agreement rate, w = 1 / max(nA, nB).
inline MixtureParams default_em_init(const ComparisonData& d) {
  MixtureParams p;
  p.w = 1.0 / static_cast<double>(std::max<std::size_t>({d.nA, d.nB, 1}));
  p.m.assign(d.h, 0.9);
  p.u.assign(d.h, 0.0);
  const auto total = static_cast<double>(d.pairs());
  for (const auto& [y, c] : d.counts) {
    for (std::size_t i = 0; i < d.h; ++i) {
      if (pattern_bit(y, i)) p.u[i] += static_cast<double>(c);
    }
  }
  for (auto& v : p.u) v = total > 0.0 ? v / total : 0.0;
  return p;
}

struct EmFit {
  MixtureParams params;
  int iterations = 0;
  bool converged = false;
  bool identifiable = true;
  bool swapped = false;
  double loglik = 0.0;
  std::vector<double> loglik_trace;
  std::vector<std::string> warnings;
};

namespace detail {

inline double log_bernoulli_profile(Pattern y, const std::vector<double>& p) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::log(pattern_bit(y, i) ? p[i] : 1.0 - p[i]);
  return s;
}

inline double log_add(double x, double y) {
  if (x == kNegInf) return y;
  if (y == kNegInf) return x;
  const double hi = std::max(x, y);
  return hi + std::log1p(std::exp(std::min(x, y) - hi));
}

}  // namespace detail

// EM for the two-component product-Bernoulli mixture over pattern counts.
inline EmFit em_fit(const ComparisonData& d, const MixtureParams& init, bool constrain_w_half = true,
                    double tol = 1e-10, int max_iter = 10'000) {
  if (init.m.size() != d.h || init.u.size() != d.h) {
    throw DimensionMismatch("initial m and u need h entries");
  }
  if (d.pairs() == 0) throw SchemaError("no record pairs to fit");
  EmFit fit;
  fit.params = init;
  if (d.h < 3) fit.warnings.push_back("fewer than 3 comparison fields: mixture not identifiable");
  if (d.counts.size() < 2) {
    fit.identifiable = false;
    fit.warnings.push_back("a single comparison pattern: mixture not identifiable");
  }

  auto& p = fit.params;
  const auto total = static_cast<double>(d.pairs());
  double prev = kNegInf;
  for (int it = 0; it < max_iter; ++it) {
    const double lw = std::log(p.w);
    const double l1w = std::log1p(-p.w);
    double ll = 0.0;
    double sr = 0.0;
    std::vector<double> m_num(d.h, 0.0), u_num(d.h, 0.0);
    for (const auto& [y, count] : d.counts) {
      const auto c = static_cast<double>(count);
      const double gm = lw + detail::log_bernoulli_profile(y, p.m);
      const double gu = l1w + detail::log_bernoulli_profile(y, p.u);
      const double lg = detail::log_add(gm, gu);
      ll += c * lg;
      const double r = gm == kNegInf ? 0.0 : std::exp(gm - lg);
      sr += c * r;
      for (std::size_t i = 0; i < d.h; ++i) {
        if (!pattern_bit(y, i)) continue;
        m_num[i] += c * r;
        u_num[i] += c * (1.0 - r);
      }
    }
    fit.loglik_trace.push_back(ll);
    if (ll < prev - 1e-9 * (1.0 + std::abs(prev))) {
      throw InconsistentState("EM log-likelihood decreased at iteration " + std::to_string(it));
    }
    fit.iterations = it;
    fit.loglik = ll;
    if (it > 0 && ll - prev < tol) {
      fit.converged = true;
      break;
    }
    prev = ll;
    p.w = sr / total;
    for (std::size_t i = 0; i < d.h; ++i) {
      p.m[i] = sr > 0.0 ? m_num[i] / sr : p.m[i];
      p.u[i] = total - sr > 0.0 ? u_num[i] / (total - sr) : p.u[i];
    }
  }
  if (constrain_w_half && p.w > 0.5) {
    p.w = 1.0 - p.w;
    std::swap(p.m, p.u);
    fit.swapped = true;
  }
  return fit;
}

struct PatternScore {
  double log_lambda = 0.0;
  double posterior = 0.0;
};

struct PairScores {
  std::size_t nA = 0;
  std::size_t nB = 0;
  std::map<Pattern, PatternScore> by_pattern;
  std::vector<double> log_lambda;  // row-major
  std::vector<double> posterior;   // row-major

  PairPosterior as_pair_posterior() const {
    PairPosterior post{nA, nB, {}};
    for (std::size_t a = 0; a < nA; ++a) {
      for (std::size_t b = 0; b < nB; ++b) {
        const double pr = posterior[a * nB + b];
        if (pr > 0.0) post.probs[{a, b}] = pr;
      }
    }
    return post;
  }
};

// log lambda(y) and p(match | y); infinite log ratios are allowed.
inline PatternScore score_pattern(const MixtureParams& p, Pattern y) {
  double ll = 0.0;
  for (std::size_t i = 0; i < p.m.size(); ++i) {
    const bool agree = pattern_bit(y, i);
    const double num = std::log(agree ? p.m[i] : 1.0 - p.m[i]);
    const double den = std::log(agree ? p.u[i] : 1.0 - p.u[i]);
    if (num == den) continue;  // includes both -inf
    ll += num - den;
  }
  const double log_odds = std::log(p.w) - std::log1p(-p.w) + ll;
  double post = 0.0;
  if (std::isnan(log_odds)) {
    post = 0.5;
  } else if (log_odds >= 0.0) {
    post = 1.0 / (1.0 + std::exp(-log_odds));
  } else {
    const double e = std::exp(log_odds);
    post = e / (1.0 + e);
  }
  return {ll, post};
}

inline PairScores score_pairs(const MixtureParams& p, const ComparisonData& d) {
  if (p.m.size() != d.h || p.u.size() != d.h) throw DimensionMismatch("m and u need h entries");
  PairScores s;
  s.nA = d.nA;
  s.nB = d.nB;
  for (const auto& [y, c] : d.counts) s.by_pattern[y] = score_pattern(p, y);
  s.log_lambda.resize(d.patterns.size());
  s.posterior.resize(d.patterns.size());
  for (std::size_t k = 0; k < d.patterns.size(); ++k) {
    const auto& ps = s.by_pattern[d.patterns[k]];
    s.log_lambda[k] = ps.log_lambda;
    s.posterior[k] = ps.posterior;
  }
  return s;
}

// Maximizes the summed log lambda over one-to-one matchings.
inline MatchingMatrix lp_assign(const std::vector<double>& log_lambda, std::size_t nA,
                                std::size_t nB) {
  if (log_lambda.size() != nA * nB) throw DimensionMismatch("score matrix is not nA x nB");
  return max_weight_matching(log_lambda, nA, nB);
}

inline MatchingMatrix lp_assign(const PairScores& s) { return lp_assign(s.log_lambda, s.nA, s.nB); }

// p(N | T_hat): the population posterior with the match count plugged in.
inline IntegerPmf hybrid_popsize(std::int64_t T_hat, std::int64_t nA, std::int64_t nB,
                                 const PriorConfig& prior, double epsilon = 1e-12) {
  return n_posterior(T_hat, nA, nB, prior, epsilon);
}

// ---------------------------------------------------------------------------
// Jaro constrained model

struct JaroConfig {
  std::int64_t iterations = 10'000;
  std::int64_t burn_in = 1'000;
  std::int64_t thin = 1;
  std::uint64_t seed = 1;
  double epsilon = 1e-12;
  std::int64_t moves_per_iteration = 0;  // 0 means nA + nB

  void validate() const {
    if (burn_in < 0 || iterations < burn_in) throw ConfigError("need iterations >= burn_in >= 0");
    if (thin < 1) throw ConfigError("thin must be >= 1");
    if (moves_per_iteration < 0) throw ConfigError("moves_per_iteration must be >= 0");
    if (!(epsilon > 0.0 && epsilon <= 1e-6)) throw ConfigError("epsilon must lie in (0, 1e-6]");
  }
};

namespace detail {

// Subset of [0, n) with O(1) insert, erase and uniform draw.
class IndexSet {
 public:
  explicit IndexSet(std::size_t n = 0) : pos_(n, npos) {}

  void insert(std::size_t x) {
    if (pos_[x] != npos) return;
    pos_[x] = items_.size();
    items_.push_back(x);
  }
  void erase(std::size_t x) {
    const std::size_t p = pos_[x];
    if (p == npos) return;
    items_[p] = items_.back();
    pos_[items_[p]] = p;
    items_.pop_back();
    pos_[x] = npos;
  }
  std::size_t size() const noexcept { return items_.size(); }
  std::size_t draw(Rng& rng) const { return items_[uniform_index(items_.size(), rng)]; }

 private:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::vector<std::size_t> items_;
  std::vector<std::size_t> pos_;
};

inline double draw_beta(double a, double b, Rng& rng) {
  const double x = draw_gamma(a, rng);
  const double y = draw_gamma(b, rng);
  return x + y > 0.0 ? x / (x + y) : 0.5;
}

}  // namespace detail

class JaroChain {
 public:
  JaroChain(const ComparisonData& data, PriorConfig prior, JaroConfig config)
      : d_(data), prior_(std::move(prior)), config_(config) {
    prior_.validate();
    config_.validate();
    agree_total_.assign(d_.h, 0.0);
    for (const auto& [y, c] : d_.counts) {
      for (std::size_t i = 0; i < d_.h; ++i) {
        if (pattern_bit(y, i)) agree_total_[i] += static_cast<double>(c);
      }
    }
  }

  PosteriorDraws run() {
    Rng rng(config_.seed);
    init();
    PosteriorDraws out;
    out.nA = d_.nA;
    out.nB = d_.nB;
    out.has_pairs = true;
    for (std::size_t i = 0; i < d_.h; ++i) out.param_names.push_back("m_" + std::to_string(i + 1));
    for (std::size_t i = 0; i < d_.h; ++i) out.param_names.push_back("u_" + std::to_string(i + 1));

    const std::int64_t moves = config_.moves_per_iteration > 0
                                   ? config_.moves_per_iteration
                                   : static_cast<std::int64_t>(d_.nA + d_.nB);
    for (std::int64_t it = 0; it < config_.iterations; ++it) {
      update_m_u(rng);
      N_ = n_post(T()).sample(rng);
      refresh_llr();
      for (std::int64_t k = 0; k < moves; ++k) move(rng);
      if (it < config_.burn_in || (it - config_.burn_in) % config_.thin != 0) continue;
      out.iteration.push_back(it + 1);
      out.N.push_back(N_);
      out.T.push_back(T());
      std::vector<double> row = m_;
      row.insert(row.end(), u_.begin(), u_.end());
      out.params.push_back(std::move(row));
      for (auto ab : C_.pairs()) ++out.pair_match_counts[ab];
    }
    return out;
  }

 private:
  std::int64_t T() const { return static_cast<std::int64_t>(C_.T()); }

  void init() {
    C_ = MatchingMatrix(d_.nA, d_.nB);
    free_a_ = detail::IndexSet(d_.nA);
    free_b_ = detail::IndexSet(d_.nB);
    matched_a_ = detail::IndexSet(d_.nA);
    for (std::size_t a = 0; a < d_.nA; ++a) free_a_.insert(a);
    for (std::size_t b = 0; b < d_.nB; ++b) free_b_.insert(b);
    const Pattern all = d_.h == 32 ? ~Pattern{0} : (Pattern{1} << d_.h) - 1;
    for (std::size_t a = 0; a < d_.nA; ++a) {
      for (std::size_t b = 0; b < d_.nB; ++b) {
        if (d_.at(a, b) == all && C_.partner_of_b(b) == MatchingMatrix::npos) {
          link(a, b);
          break;
        }
      }
    }
    const auto init = default_em_init(d_);
    m_ = init.m;
    u_ = init.u;
    const auto floor = static_cast<std::int64_t>(d_.nA + d_.nB) - T();
    N_ = std::max<std::int64_t>(
        floor, static_cast<std::int64_t>(std::ceil(chapman_estimate(
                   static_cast<double>(d_.nA), static_cast<double>(d_.nB), static_cast<double>(T())))));
    if (prior_.n_cap) N_ = std::min(N_, *prior_.n_cap);
  }

  void link(std::size_t a, std::size_t b) {
    C_.add(a, b);
    free_a_.erase(a);
    free_b_.erase(b);
    matched_a_.insert(a);
  }
  void unlink(std::size_t a, std::size_t b) {
    C_.remove(a, b);
    free_a_.insert(a);
    free_b_.insert(b);
    matched_a_.erase(a);
  }

  void update_m_u(Rng& rng) {
    std::vector<double> agree(d_.h, 0.0);
    for (auto [a, b] : C_.pairs()) {
      const Pattern y = d_.at(a, b);
      for (std::size_t i = 0; i < d_.h; ++i) agree[i] += pattern_bit(y, i);
    }
    const auto t = static_cast<double>(T());
    const auto rest = static_cast<double>(d_.pairs()) - t;
    for (std::size_t i = 0; i < d_.h; ++i) {
      m_[i] = detail::draw_beta(1.0 + agree[i], 1.0 + t - agree[i], rng);
      const double ua = agree_total_[i] - agree[i];
      u_[i] = detail::draw_beta(1.0 + ua, 1.0 + rest - ua, rng);
    }
  }

  void refresh_llr() {
    llr_.clear();
    MixtureParams p{0.5, m_, u_};
    for (const auto& [y, c] : d_.counts) llr_[y] = score_pattern(p, y).log_lambda;
  }

  double llr(std::size_t a, std::size_t b) const { return llr_.at(d_.at(a, b)); }

  // log p(C | N) for a matching with T pairs.
  double log_prior_C(std::int64_t T) const {
    const auto nA = static_cast<std::int64_t>(d_.nA);
    const auto nB = static_cast<std::int64_t>(d_.nB);
    return log_p_C_given_T(T, nA, nB) + log_p_T_given_N(T, nA, nB, N_);
  }

  void move(Rng& rng) {
    const double u = uniform01(rng);
    const std::int64_t t = T();
    const auto nA = static_cast<double>(d_.nA);
    const auto nB = static_cast<double>(d_.nB);
    if (u < 0.4) {
      if (free_a_.size() == 0 || free_b_.size() == 0) return;
      const std::size_t a = free_a_.draw(rng);
      const std::size_t b = free_b_.draw(rng);
      const double log_acc = log_prior_C(t + 1) - log_prior_C(t) + llr(a, b) +
                             std::log((nA - t) * (nB - t)) - std::log(static_cast<double>(t + 1));
      if (accept(log_acc, rng)) link(a, b);
    } else if (u < 0.8) {
      if (t == 0) return;
      const std::size_t a = matched_a_.draw(rng);
      const std::size_t b = C_.partner_of_a(a);
      const double log_acc = log_prior_C(t - 1) - log_prior_C(t) - llr(a, b) +
                             std::log(static_cast<double>(t)) -
                             std::log((nA - t + 1) * (nB - t + 1));
      if (accept(log_acc, rng)) unlink(a, b);
    } else {
      if (t == 0 || d_.nB < 2) return;
      const std::size_t a = matched_a_.draw(rng);
      const std::size_t b = C_.partner_of_a(a);
      std::size_t b2 = uniform_index(d_.nB - 1, rng);
      if (b2 >= b) ++b2;
      const std::size_t a2 = C_.partner_of_b(b2);
      if (a2 == MatchingMatrix::npos) {
        if (accept(llr(a, b2) - llr(a, b), rng)) {
          unlink(a, b);
          link(a, b2);
        }
      } else {
        const double log_acc = llr(a, b2) + llr(a2, b) - llr(a, b) - llr(a2, b2);
        if (accept(log_acc, rng)) {
          unlink(a, b);
          unlink(a2, b2);
          link(a, b2);
          link(a2, b);
        }
      }
    }
  }

  static bool accept(double log_acc, Rng& rng) {
    if (std::isnan(log_acc)) return false;
    return log_acc >= 0.0 || uniform01(rng) < std::exp(log_acc);
  }

  const IntegerPmf& n_post(std::int64_t T) {
    auto it = n_cache_.find(T);
    if (it == n_cache_.end()) {
      it = n_cache_
               .emplace(T, n_posterior(T, static_cast<std::int64_t>(d_.nA),
                                       static_cast<std::int64_t>(d_.nB), prior_, config_.epsilon))
               .first;
    }
    return it->second;
  }

  const ComparisonData& d_;
  PriorConfig prior_;
  JaroConfig config_;
  std::vector<double> agree_total_;
  MatchingMatrix C_{0, 0};
  detail::IndexSet free_a_, free_b_, matched_a_;
  std::vector<double> m_, u_;
  std::int64_t N_ = 0;
  std::map<Pattern, double> llr_;
  std::map<std::int64_t, IntegerPmf> n_cache_;
};

inline PosteriorDraws jaro_constrained_chain(const ComparisonData& data, const PriorConfig& prior,
                                             const JaroConfig& config) {
  return JaroChain(data, prior, config).run();
}

// ---------------------------------------------------------------------------
// Several blocks

struct BlockPosterior {
  std::int64_t nA = 0;
  std::int64_t nB = 0;
  std::int64_t T_hat = 0;              // classical match count, used by the fallback
  std::vector<std::int64_t> N_draws;  // empty for blocks handled by the fallback
};

// Blocks with fewer than two records in either file get a fixed Chapman value.
inline bool block_needs_fallback(std::int64_t nA, std::int64_t nB) { return nA < 2 || nB < 2; }

// Draws of the summed population size divided by `sampling_fraction`.
inline std::vector<double> aggregate_blocks(const std::vector<BlockPosterior>& blocks,
                                            double sampling_fraction = 1.0) {
  if (!(sampling_fraction > 0.0)) throw ConfigError("sampling fraction must be > 0");
  std::optional<std::size_t> draws;
  double fixed = 0.0;
  for (const auto& blk : blocks) {
    if (block_needs_fallback(blk.nA, blk.nB) || blk.N_draws.empty()) {
      fixed += chapman_estimate(static_cast<double>(blk.nA), static_cast<double>(blk.nB),
                                static_cast<double>(blk.T_hat));
      continue;
    }
    if (draws && *draws != blk.N_draws.size()) {
      throw DimensionMismatch("blocks carry different numbers of posterior draws");
    }
    draws = blk.N_draws.size();
  }
  std::vector<double> total(draws.value_or(1), fixed);
  for (const auto& blk : blocks) {
    if (block_needs_fallback(blk.nA, blk.nB) || blk.N_draws.empty()) continue;
    for (std::size_t r = 0; r < total.size(); ++r) total[r] += static_cast<double>(blk.N_draws[r]);
  }
  for (auto& v : total) v /= sampling_fraction;
  return total;
}

}  // namespace bayeslink
