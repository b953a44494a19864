#pragma once

// Metropolis-within-Gibbs sampler for the joint posterior of the true values
// (muA, muB), the per-cell match counts t, the population counts F and size N,
// the superpopulation probabilities theta and the hit-miss parameters beta.
// One outer iteration runs the blocks
//
//   (muA, muB, t) | F, N, theta, beta
//   (F, N)        | muA, muB, t, theta
//   theta         | F
//   beta          | muA, muB
//
// and, when requested, draws a matching matrix C | muA, muB, t.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bayeslink/core.hpp"
#include "bayeslink/decision.hpp"
#include "bayeslink/draws.hpp"
#include "bayeslink/errors.hpp"
#include "bayeslink/measurement.hpp"
#include "bayeslink/popsize.hpp"
#include "bayeslink/random.hpp"
#include "bayeslink/theta.hpp"

namespace bayeslink {

enum class File { A, B };

struct SamplerConfig {
  std::int64_t iterations = 10'000;
  std::int64_t burn_in = 1'000;
  std::int64_t thin = 1;
  int inner_sweeps = 5;
  std::uint64_t seed = 1;
  double epsilon = 1e-12;  // tail mass left out of each N draw
  bool draw_C = true;
  bool per_file_beta = false;
  bool check_invariants = false;
  std::vector<ThetaMargin> theta_margins;

  void validate() const {
    if (burn_in < 0 || iterations < burn_in) {
      throw ConfigError("need iterations >= burn_in >= 0");
    }
    if (thin < 1) throw ConfigError("thin must be >= 1");
    if (inner_sweeps < 1) throw ConfigError("inner_sweeps must be >= 1");
    if (!(epsilon > 0.0 && epsilon <= 1e-6)) throw ConfigError("epsilon must lie in (0, 1e-6]");
  }
};

struct LatentState {
  std::vector<CellIndex> muA;
  std::vector<CellIndex> muB;
  FrequencyVector fA;
  FrequencyVector fB;
  FrequencyVector t;
  FrequencyVector F;
  std::int64_t N = 0;
  ThetaBlocks theta;
  std::vector<double> betaA;
  std::vector<double> betaB;  // equal to betaA unless beta is per file

  std::int64_t T() const { return t.total(); }

  // Throws InconsistentState on the first violated invariant.
  void check() const {
    if (!(frequencies(muA) == fA) || !(frequencies(muB) == fB)) {
      throw InconsistentState("sample frequencies out of sync with true values");
    }
    for (const auto& [cell, tj] : t) {
      if (tj > std::min(fA[cell], fB[cell])) {
        throw InconsistentState("t exceeds min(fA, fB) in cell " + std::to_string(cell.j));
      }
    }
    for (const auto& [cell, a] : fA) {
      if (F[cell] < a) throw InconsistentState("fA exceeds F in cell " + std::to_string(cell.j));
    }
    for (const auto& [cell, b] : fB) {
      if (F[cell] < b) throw InconsistentState("fB exceeds F in cell " + std::to_string(cell.j));
      if (F[cell] < fA[cell] + b - t[cell]) {
        throw InconsistentState("F too small for the matched units in cell " +
                                std::to_string(cell.j));
      }
    }
    if (F.total() != N) throw InconsistentState("sum of F differs from N");
    if (N < static_cast<std::int64_t>(std::max(muA.size(), muB.size()))) {
      throw InconsistentState("N below the larger sample size");
    }
    for (const auto& table : theta.tables()) {
      double s = 0.0;
      for (double p : table) s += p;
      if (std::abs(s - 1.0) > 1e-12) throw InconsistentState("theta block does not sum to 1");
    }
    for (const auto* beta : {&betaA, &betaB}) {
      for (double b : *beta) {
        if (!(b >= 0.0 && b <= 1.0)) throw InconsistentState("beta outside [0, 1]");
      }
    }
  }
};

class HierarchicalSampler {
 public:
  HierarchicalSampler(KeySchema schema, RecordTable xA, RecordTable xB, PriorConfig prior,
                      SamplerConfig config)
      : schema_(std::move(schema)),
        xA_(std::move(xA)),
        xB_(std::move(xB)),
        prior_(std::move(prior)),
        config_(std::move(config)) {
    prior_.validate();
    config_.validate();
    if (xA_.h() != schema_.h() || xB_.h() != schema_.h()) {
      throw SchemaError("record tables do not conform to the schema");
    }
    for (const auto& m : config_.theta_margins) {
      if (m.var >= schema_.h()) throw ConfigError("theta margin names an unknown variable");
      schema_.check_code(m.var, m.code);
    }
    hyper_.resize(schema_.blocks().size());
    for (std::size_t b = 0; b < schema_.blocks().size(); ++b) {
      const auto size = schema_.blocks()[b].size;
      const std::vector<double>* given =
          b < prior_.dirichlet_hyper.size() ? &prior_.dirichlet_hyper[b] : nullptr;
      if (given == nullptr || given->empty()) {
        hyper_[b].assign(size, prior_.dirichlet_default);
      } else if (given->size() == 1) {
        hyper_[b].assign(size, given->front());
      } else if (given->size() == size) {
        hyper_[b] = *given;
      } else {
        throw ConfigError("Dirichlet block " + std::to_string(b + 1) + " needs " +
                          std::to_string(size) + " concentrations");
      }
    }
  }

  const KeySchema& schema() const noexcept { return schema_; }
  const RecordTable& xA() const noexcept { return xA_; }
  const RecordTable& xB() const noexcept { return xB_; }
  const PriorConfig& prior() const noexcept { return prior_; }
  const SamplerConfig& config() const noexcept { return config_; }
  std::int64_t nA() const { return static_cast<std::int64_t>(xA_.n()); }
  std::int64_t nB() const { return static_cast<std::int64_t>(xB_.n()); }

  // Swap in new observations of the same shape (used by simulation-based checks).
  void set_observations(RecordTable xA, RecordTable xB) {
    if (xA.n() != xA_.n() || xB.n() != xB_.n() || xA.h() != schema_.h() ||
        xB.h() != schema_.h()) {
      throw DimensionMismatch("replacement observations change the sample shape");
    }
    xA_ = std::move(xA);
    xB_ = std::move(xB);
  }

  // mu := x; exact-agreement pairs matched greedily in (a, b) order; N from the
  // larger of the minimum support and the Chapman estimate; residual population
  // spread by a uniform theta; beta_i = 0.9.
  LatentState initial_state(Rng& rng) const {
    LatentState st;
    st.muA = xA_.cells(schema_);
    st.muB = xB_.cells(schema_);
    st.fA = frequencies(st.muA);
    st.fB = frequencies(st.muB);

    const auto C = greedy_exact_matching(st.muA, st.muB);
    st.t = t_from(st.muA, st.muB, C);
    const std::int64_t T = st.T();
    const std::int64_t floor_n = nA() + nB() - T;
    st.N = std::max(floor_n, static_cast<std::int64_t>(std::ceil(
                                 chapman_estimate(static_cast<double>(nA()),
                                                  static_cast<double>(nB()),
                                                  static_cast<double>(T)))));
    if (prior_.n_cap) st.N = std::max(floor_n, std::min(st.N, *prior_.n_cap));

    st.theta = ThetaBlocks::uniform(schema_);
    fill_population(st, rng);
    st.betaA.assign(schema_.h(), 0.9);
    st.betaB = st.betaA;
    return st;
  }

  // Exact draw of unit s's true value given everything else in its file and F.
  void update_mu_unit(LatentState& st, File file, std::size_t s, Rng& rng) const {
    MuBlock block(*this, st, file);
    block.resample(s, rng);
    block.commit(st);
  }

  // inner_sweeps Gibbs cycles over every unit of both files.
  void update_mu(LatentState& st, Rng& rng) const {
    for (File file : {File::A, File::B}) {
      MuBlock block(*this, st, file);
      const std::size_t n = file == File::A ? xA_.n() : xB_.n();
      for (int sweep = 0; sweep < config_.inner_sweeps; ++sweep) {
        for (std::size_t s = 0; s < n; ++s) block.resample(s, rng);
      }
      block.commit(st);
    }
  }

  // t_j ~ Hypergeometric(F_j, fA_j, fB_j), independently per cell.
  void update_t(LatentState& st, Rng& rng) const {
    FrequencyVector t;
    for (const auto& [cell, a] : st.fA) {
      const std::int64_t b = st.fB[cell];
      if (b == 0) continue;
      t.add(cell, draw_hypergeometric(st.F[cell], a, b, rng));
    }
    for (const auto& [cell, b] : st.fB) {
      if (st.F[cell] < b) {
        throw InconsistentState("fB exceeds F in cell " + std::to_string(cell.j));
      }
    }
    st.t = std::move(t);
  }

  // N | T, then the unsampled units allocated to cells by a theta-multinomial.
  void update_F(LatentState& st, Rng& rng) const {
    st.N = n_posterior_cached(st.T()).sample(rng);
    fill_population(st, rng);
  }

  // Conjugate Dirichlet update of each block from the block margins of F.
  void update_theta(LatentState& st, Rng& rng) const {
    std::vector<std::vector<double>> tables;
    for (std::size_t b = 0; b < schema_.blocks().size(); ++b) {
      std::vector<double> alpha = hyper_[b];
      for (const auto& [cell, count] : st.F) {
        alpha[schema_.block_offset(cell, b)] += static_cast<double>(count);
      }
      tables.push_back(draw_dirichlet(alpha, rng));
    }
    st.theta = ThetaBlocks::from_tables(std::move(tables));
  }

  // eta_i = beta_i + (1 - beta_i)/k_i ~ Beta(hits + 1, misses + 1) on (1/k_i, 1).
  void update_beta(LatentState& st, Rng& rng) const {
    const std::size_t h = schema_.h();
    if (!config_.per_file_beta) {
      const auto n = static_cast<double>(xA_.n() + xB_.n());
      for (std::size_t i = 0; i < h; ++i) {
        const auto hits = static_cast<double>(hit_count(xA_, st.muA, xB_, st.muB, schema_, i));
        st.betaA[i] = draw_beta_component(hits, n, schema_.k(i), rng);
      }
      st.betaB = st.betaA;
      return;
    }
    for (std::size_t i = 0; i < h; ++i) {
      const auto hits_a = static_cast<double>(hit_count(xA_, st.muA, schema_, i));
      const auto hits_b = static_cast<double>(hit_count(xB_, st.muB, schema_, i));
      st.betaA[i] =
          draw_beta_component(hits_a, static_cast<double>(xA_.n()), schema_.k(i), rng);
      st.betaB[i] =
          draw_beta_component(hits_b, static_cast<double>(xB_.n()), schema_.k(i), rng);
    }
  }

  // Uniform matching with t_j pairs inside each block A_j x B_j.
  MatchingMatrix draw_C(const LatentState& st, Rng& rng) const {
    std::map<CellIndex, std::vector<std::size_t>> unitsA;
    std::map<CellIndex, std::vector<std::size_t>> unitsB;
    for (std::size_t a = 0; a < st.muA.size(); ++a) unitsA[st.muA[a]].push_back(a);
    for (std::size_t b = 0; b < st.muB.size(); ++b) unitsB[st.muB[b]].push_back(b);
    MatchingMatrix C(st.muA.size(), st.muB.size());
    for (const auto& [cell, tj] : st.t) {
      const auto& A = unitsA[cell];
      const auto& B = unitsB[cell];
      if (static_cast<std::size_t>(tj) > std::min(A.size(), B.size())) {
        throw InconsistentState("t exceeds the block size in cell " + std::to_string(cell.j));
      }
      const auto pickA = sample_without_replacement(A.size(), static_cast<std::size_t>(tj), rng);
      const auto pickB = sample_without_replacement(B.size(), static_cast<std::size_t>(tj), rng);
      for (std::size_t r = 0; r < pickA.size(); ++r) C.add(A[pickA[r]], B[pickB[r]]);
    }
    return C;
  }

  void step(LatentState& st, Rng& rng) const {
    update_mu(st, rng);
    update_t(st, rng);
    update_F(st, rng);
    update_theta(st, rng);
    update_beta(st, rng);
  }

  PosteriorDraws run() const {
    Rng rng(config_.seed);
    LatentState st = initial_state(rng);
    return run_from(st, rng);
  }

  // beta_i (or beta_A_i then beta_B_i), then the requested theta margins.
  std::vector<std::string> param_names() const {
    std::vector<std::string> names;
    const std::size_t h = schema_.h();
    for (std::size_t i = 0; i < h; ++i) {
      names.push_back(config_.per_file_beta ? "beta_A_" + std::to_string(i + 1)
                                            : "beta_" + std::to_string(i + 1));
    }
    if (config_.per_file_beta) {
      for (std::size_t i = 0; i < h; ++i) names.push_back("beta_B_" + std::to_string(i + 1));
    }
    for (const auto& m : config_.theta_margins) names.push_back(m.name());
    return names;
  }

  PosteriorDraws run_from(LatentState& st, Rng& rng) const {
    PosteriorDraws out;
    out.nA = xA_.n();
    out.nB = xB_.n();
    out.has_pairs = config_.draw_C;
    out.param_names = param_names();

    for (std::int64_t it = 0; it < config_.iterations; ++it) {
      step(st, rng);
      if (it < config_.burn_in || (it - config_.burn_in) % config_.thin != 0) continue;
      if (config_.check_invariants) st.check();
      out.iteration.push_back(it + 1);
      out.N.push_back(st.N);
      out.T.push_back(st.T());
      std::vector<double> row = st.betaA;
      if (config_.per_file_beta) row.insert(row.end(), st.betaB.begin(), st.betaB.end());
      for (const auto& m : config_.theta_margins) row.push_back(st.theta.margin(schema_, m));
      out.params.push_back(std::move(row));
      if (config_.draw_C) {
        for (auto ab : draw_C(st, rng).pairs()) ++out.pair_match_counts[ab];
      }
    }
    return out;
  }

  // Posterior of N given T under this sampler's prior, memoized per T.
  const IntegerPmf& n_posterior_cached(std::int64_t T) const {
    auto it = n_cache_.find(T);
    if (it == n_cache_.end()) {
      it = n_cache_.emplace(T, n_posterior(T, nA(), nB(), prior_, config_.epsilon)).first;
    }
    return it->second;
  }

  MatchingMatrix greedy_exact_matching(std::span<const CellIndex> cellsA,
                                       std::span<const CellIndex> cellsB) const {
    MatchingMatrix C(cellsA.size(), cellsB.size());
    std::map<CellIndex, std::vector<std::size_t>> queue;
    for (std::size_t b = cellsB.size(); b-- > 0;) queue[cellsB[b]].push_back(b);
    for (std::size_t a = 0; a < cellsA.size(); ++a) {
      auto it = queue.find(cellsA[a]);
      if (it == queue.end() || it->second.empty()) continue;
      C.add(a, it->second.back());
      it->second.pop_back();
    }
    return C;
  }

 private:
  // Working copy of one file's true values restricted to the support of F,
  // which stays fixed while the units of that file are resampled.
  class MuBlock {
   public:
    MuBlock(const HierarchicalSampler& s, const LatentState& st, File file)
        : file_(file), x_(file == File::A ? s.xA_ : s.xB_) {
      const auto& schema = s.schema_;
      const auto& beta = file == File::A ? st.betaA : st.betaB;
      const auto& mu = file == File::A ? st.muA : st.muB;
      const std::size_t h = schema.h();
      for (const auto& [cell, count] : st.F) {
        cells_.push_back(cell);
        residual_.push_back(static_cast<double>(count));
      }
      const std::size_t m = cells_.size();
      std::vector<Code> codes(m * h);
      for (std::size_t c = 0; c < m; ++c) {
        for (std::size_t i = 0; i < h; ++i) codes[c * h + i] = schema.code_at(cells_[c], i);
      }
      std::vector<double> hit(h);
      std::vector<double> miss(h);
      for (std::size_t i = 0; i < h; ++i) {
        miss[i] = (1.0 - beta[i]) / static_cast<double>(schema.k(i));
        hit[i] = beta[i] + miss[i];
      }
      const std::size_t n = x_.n();
      lik_.resize(n * m);
      for (std::size_t s_ = 0; s_ < n; ++s_) {
        const auto row = x_.row(s_);
        for (std::size_t c = 0; c < m; ++c) {
          double l = 1.0;
          for (std::size_t i = 0; i < h; ++i) l *= row[i] == codes[c * h + i] ? hit[i] : miss[i];
          lik_[s_ * m + c] = l;
        }
      }
      local_.resize(n);
      for (std::size_t u = 0; u < n; ++u) {
        auto it = std::lower_bound(cells_.begin(), cells_.end(), mu[u]);
        if (it == cells_.end() || *it != mu[u]) {
          throw InconsistentState("true value of a unit lies outside the support of F");
        }
        local_[u] = static_cast<std::size_t>(it - cells_.begin());
        residual_[local_[u]] -= 1.0;
        if (residual_[local_[u]] < 0.0) throw InconsistentState("sample frequency exceeds F");
      }
      weights_.resize(m);
    }

    void resample(std::size_t s, Rng& rng) {
      const std::size_t m = cells_.size();
      residual_[local_[s]] += 1.0;
      const double* lik = &lik_[s * m];
      for (std::size_t c = 0; c < m; ++c) weights_[c] = residual_[c] * lik[c];
      const std::size_t pick = draw_categorical(weights_, rng);
      residual_[pick] -= 1.0;
      local_[s] = pick;
    }

    void commit(LatentState& st) const {
      auto& mu = file_ == File::A ? st.muA : st.muB;
      for (std::size_t u = 0; u < local_.size(); ++u) mu[u] = cells_[local_[u]];
      (file_ == File::A ? st.fA : st.fB) = frequencies(mu);
    }

   private:
    File file_;
    const RecordTable& x_;
    std::vector<CellIndex> cells_;
    std::vector<double> residual_;  // F_c minus this file's units currently in c
    std::vector<double> lik_;       // n x |supp F| hit-miss likelihoods
    std::vector<std::size_t> local_;
    std::vector<double> weights_;
  };

  static double draw_beta_component(double hits, double n, Code k, Rng& rng) {
    const double kd = static_cast<double>(k);
    const double eta = draw_truncated_beta(hits + 1.0, n - hits + 1.0, 1.0 / kd, 1.0, rng);
    return std::clamp((kd * eta - 1.0) / (kd - 1.0), 0.0, 1.0);
  }

  // F := fA + fB - t plus N - (nA + nB - T) units drawn from theta.
  void fill_population(LatentState& st, Rng& rng) const {
    FrequencyVector F;
    for (const auto& [cell, a] : st.fA) F.add(cell, a);
    for (const auto& [cell, b] : st.fB) F.add(cell, b);
    for (const auto& [cell, tj] : st.t) F.remove(cell, tj);
    const std::int64_t extra = st.N - F.total();
    if (extra < 0) throw InconsistentState("N smaller than the number of distinct sampled units");
    for (std::int64_t r = 0; r < extra; ++r) F.add(st.theta.draw_cell(schema_, rng));
    st.F = std::move(F);
  }

  KeySchema schema_;
  RecordTable xA_;
  RecordTable xB_;
  PriorConfig prior_;
  SamplerConfig config_;
  std::vector<std::vector<double>> hyper_;
  mutable std::map<std::int64_t, IntegerPmf> n_cache_;
};

inline PosteriorDraws run_chain(const RecordTable& xA, const RecordTable& xB,
                                const KeySchema& schema, const PriorConfig& prior,
                                const SamplerConfig& config) {
  return HierarchicalSampler(schema, xA, xB, prior, config).run();
}

}  // namespace bayeslink
