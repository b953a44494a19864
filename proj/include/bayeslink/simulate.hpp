#pragma once

// Synthetic populations and the replication harness comparing the
// hierarchical model, the Jaro constrained chain and the hybrid plug-in
// estimator on coverage, interval length and false match rates.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "bayeslink/baselines.hpp"
#include "bayeslink/core.hpp"
#include "bayeslink/decision.hpp"
#include "bayeslink/errors.hpp"
#include "bayeslink/numeric.hpp"
#include "bayeslink/random.hpp"
#include "bayeslink/sampler.hpp"

namespace bayeslink {

struct Scenario {
  int id = 1;
  KeySchema schema;  // carries the independence pattern used when fitting
  std::int64_t N_true = 100;
  std::int64_t n = 90;
  double beta_true = 0.95;
  std::int64_t replicates = 20;
  std::uint64_t seed = 1;

  void validate() const {
    if (id < 1 || id > 3) throw ConfigError("scenario id must be 1, 2 or 3");
    if (n < 1 || n > N_true) throw ConfigError("need 1 <= n <= N_true");
    if (!(beta_true >= 0.0 && beta_true <= 1.0)) throw ConfigError("beta_true outside [0, 1]");
    if (replicates < 0) throw ConfigError("replicates must be >= 0");
  }
};

// Scenarios 1 and 3 are fitted under full independence, scenario 2 with a
// single saturated block.
inline Scenario make_scenario(int id, std::int64_t n = 90, double beta = 0.95,
                              std::int64_t replicates = 20, std::uint64_t seed = 1) {
  std::vector<Code> k;
  std::vector<std::vector<std::size_t>> pattern;
  switch (id) {
    case 1:
      k = {64, 16, 4};
      break;
    case 2:
      k = {64, 16, 4};
      pattern = {{0, 1, 2}};
      break;
    case 3:
      k = {32, 16, 4, 4, 2, 2};
      break;
    default:
      throw ConfigError("scenario id must be 1, 2 or 3");
  }
  Scenario s{id, KeySchema(k, pattern), 100, n, beta, replicates, seed};
  s.validate();
  return s;
}

namespace detail {
inline std::vector<double> normalized(std::vector<double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  for (double& x : v) x /= s;
  return v;
}

inline std::vector<double> powers(Code k, double exponent) {
  std::vector<double> v(k);
  for (Code j = 1; j <= k; ++j) v[j - 1] = std::pow(static_cast<double>(j), exponent);
  return normalized(std::move(v));
}
}  // namespace detail

// Dense theta over all K cells in lexicographic order.
inline std::vector<double> scenario_theta(const Scenario& sc) {
  const auto& schema = sc.schema;
  const std::uint64_t K = schema.K();
  std::vector<double> theta(K);
  if (sc.id == 2) {
    const auto b3 = detail::powers(schema.k(2), 1.0);
    for (Code j3 = 1; j3 <= schema.k(2); ++j3) {
      const auto b2 = detail::powers(schema.k(1), static_cast<double>(j3));
      const auto b1 = detail::powers(schema.k(0), 1.0 / static_cast<double>(j3));
      for (Code j1 = 1; j1 <= schema.k(0); ++j1) {
        for (Code j2 = 1; j2 <= schema.k(1); ++j2) {
          const Code codes[] = {j1, j2, j3};
          theta[schema.cell_of(codes).j - 1] = b3[j3 - 1] * b2[j2 - 1] * b1[j1 - 1];
        }
      }
    }
    return theta;
  }
  std::vector<std::vector<double>> margins;
  for (std::size_t i = 0; i < schema.h(); ++i) margins.push_back(detail::powers(schema.k(i), 1.0));
  for (std::uint64_t j = 1; j <= K; ++j) {
    const auto codes = schema.tuple_of(CellIndex{j});
    double p = 1.0;
    for (std::size_t i = 0; i < codes.size(); ++i) p *= margins[i][codes[i] - 1];
    theta[j - 1] = p;
  }
  return theta;
}

struct SimulatedPair {
  RecordTable xA;
  RecordTable xB;
  std::vector<CellIndex> muA;
  std::vector<CellIndex> muB;
  MatchingMatrix C_true{0, 0};
  FrequencyVector F_true;
};

inline Code hit_miss_corrupt(Code mu, double beta, Code k, Rng& rng) {
  if (uniform01(rng) < beta) return mu;
  return static_cast<Code>(1 + uniform_index(k, rng));
}

// Population F ~ Multinomial(N_true, theta), two simple random samples of size
// n in random order, then independent hit-miss noise on every field.
inline SimulatedPair generate_pair(const Scenario& sc, const std::vector<double>& theta, Rng& rng) {
  sc.validate();
  const auto& schema = sc.schema;
  if (theta.size() != schema.K()) throw DimensionMismatch("theta must cover all K cells");
  std::vector<double> cdf(theta.size());
  double acc = 0.0;
  for (std::size_t j = 0; j < theta.size(); ++j) cdf[j] = acc += theta[j];

  const auto N = static_cast<std::size_t>(sc.N_true);
  std::vector<CellIndex> population(N);
  SimulatedPair out{RecordTable(schema, {}, 'A'), RecordTable(schema, {}, 'B'), {}, {},
                    MatchingMatrix(static_cast<std::size_t>(sc.n), static_cast<std::size_t>(sc.n)),
                    {}};
  for (auto& cell : population) {
    const double u = uniform01(rng) * acc;
    auto j = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    j = std::min(j, cdf.size() - 1);
    while (theta[j] <= 0.0 && j > 0) --j;
    cell = CellIndex{j + 1};
    out.F_true.add(cell);
  }

  const auto n = static_cast<std::size_t>(sc.n);
  const auto unitsA = sample_without_replacement(N, n, rng);
  const auto unitsB = sample_without_replacement(N, n, rng);
  std::vector<std::size_t> pos_in_B(N, MatchingMatrix::npos);
  for (std::size_t b = 0; b < n; ++b) pos_in_B[unitsB[b]] = b;
  for (std::size_t a = 0; a < n; ++a) {
    if (pos_in_B[unitsA[a]] != MatchingMatrix::npos) out.C_true.add(a, pos_in_B[unitsA[a]]);
  }

  auto observe = [&](const std::vector<std::size_t>& units, std::vector<CellIndex>& mu, char label) {
    std::vector<Code> codes;
    codes.reserve(units.size() * schema.h());
    for (std::size_t s : units) {
      mu.push_back(population[s]);
      const auto truth = schema.tuple_of(population[s]);
      for (std::size_t i = 0; i < schema.h(); ++i) {
        codes.push_back(hit_miss_corrupt(truth[i], sc.beta_true, schema.k(i), rng));
      }
    }
    return RecordTable(schema, std::move(codes), label);
  };
  out.xA = observe(unitsA, out.muA, 'A');
  out.xB = observe(unitsB, out.muB, 'B');
  return out;
}

enum class Method { hier, jaro, hybrid };

inline std::string method_name(Method m) {
  switch (m) {
    case Method::hier:
      return "hier";
    case Method::jaro:
      return "jaro";
    case Method::hybrid:
      return "hybrid";
  }
  return "?";
}

struct StudyConfig {
  std::vector<Method> methods{Method::hier, Method::jaro, Method::hybrid};
  PriorConfig prior;
  SamplerConfig sampler = [] {
    SamplerConfig c;
    c.iterations = 9'000;
    c.burn_in = 1'000;
    return c;
  }();
  JaroConfig jaro = [] {
    JaroConfig c;
    c.iterations = 9'000;
    c.burn_in = 1'000;
    return c;
  }();
  unsigned threads = 0;  // 0 means hardware concurrency
};

// One method on one replicate.
struct ReplicateResult {
  std::int64_t replicate = 0;
  Method method = Method::hier;
  std::int64_t T_true = 0;
  double post_mean = 0.0;
  double lower = 0.0;  // 2.5% quantile
  double upper = 0.0;  // 97.5% quantile
  bool covered = false;
  std::int64_t declared = 0;
  ErrorRates rates;
};

struct MethodSummary {
  Method method = Method::hier;
  std::int64_t replicates = 0;
  MeanAndError post_mean;
  double coverage = 0.0;
  MeanAndError length;
  MeanAndError fmr1;
  MeanAndError fmr2;
};

struct ReplicationReport {
  int scenario = 0;
  std::int64_t n = 0;
  double beta = 0.0;
  std::vector<MethodSummary> methods;
  std::vector<ReplicateResult> replicates;  // ordered by replicate, then method

  const MethodSummary& summary(Method m) const {
    for (const auto& s : methods) {
      if (s.method == m) return s;
    }
    throw ConfigError("method " + method_name(m) + " was not run");
  }
};

inline ReplicateResult fit_replicate(const Scenario& sc, const SimulatedPair& data, Method method,
                                     const StudyConfig& cfg, std::uint64_t seed) {
  ReplicateResult r;
  r.method = method;
  r.T_true = static_cast<std::int64_t>(data.C_true.T());
  MatchingMatrix estimate(data.C_true.nA(), data.C_true.nB());
  std::vector<double> draws;
  if (method == Method::hybrid) {
    const auto comparisons = build_comparisons(data.xA, data.xB, sc.schema);
    const auto fit = em_fit(comparisons, default_em_init(comparisons), true);
    estimate = lp_assign(score_pairs(fit.params, comparisons));
    const auto pmf = hybrid_popsize(static_cast<std::int64_t>(estimate.T()), sc.n, sc.n, cfg.prior);
    r.post_mean = pmf.mean();
    r.lower = static_cast<double>(pmf.quantile(0.025));
    r.upper = static_cast<double>(pmf.quantile(0.975));
  } else {
    PosteriorDraws post;
    if (method == Method::hier) {
      SamplerConfig c = cfg.sampler;
      c.seed = seed;
      c.draw_C = true;
      post = run_chain(data.xA, data.xB, sc.schema, cfg.prior, c);
    } else {
      JaroConfig c = cfg.jaro;
      c.seed = seed;
      post = jaro_constrained_chain(build_comparisons(data.xA, data.xB, sc.schema), cfg.prior, c);
    }
    if (post.retained() == 0) throw ConfigError("no retained draws to summarize");
    draws.assign(post.N.begin(), post.N.end());
    r.post_mean = mean_and_se(draws).mean;
    std::sort(draws.begin(), draws.end());
    r.lower = empirical_quantile<double>(draws, 0.025);
    r.upper = empirical_quantile<double>(draws, 0.975);
    estimate = bayes_estimate(post.pair_posterior()).G;
  }
  const auto N = static_cast<double>(sc.N_true);
  r.covered = r.lower <= N && N <= r.upper;
  r.declared = static_cast<std::int64_t>(estimate.T());
  r.rates = error_rates(data.C_true, estimate);
  return r;
}

inline ReplicationReport run_study(const Scenario& sc, const StudyConfig& cfg) {
  sc.validate();
  ReplicationReport report;
  report.scenario = sc.id;
  report.n = sc.n;
  report.beta = sc.beta_true;
  const auto theta = scenario_theta(sc);
  const auto R = static_cast<std::size_t>(sc.replicates);
  const std::size_t M = cfg.methods.size();
  std::vector<ReplicateResult> results(R * M);

  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;
  std::string failing;
  auto worker = [&] {
    for (std::size_t r = next++; r < R; r = next++) {
      try {
        Rng data_rng(derive_seed(sc.seed, 2 * r));
        const auto data = generate_pair(sc, theta, data_rng);
        for (std::size_t m = 0; m < M; ++m) {
          const auto chain_seed = derive_seed(derive_seed(sc.seed, 2 * r + 1), m);
          results[r * M + m] = fit_replicate(sc, data, cfg.methods[m], cfg, chain_seed);
          results[r * M + m].replicate = static_cast<std::int64_t>(r + 1);
        }
      } catch (const std::exception& e) {
        std::lock_guard lock(err_mu);
        if (!first_error) {
          first_error = std::current_exception();
          failing = "replicate " + std::to_string(r + 1) + ": " + e.what();
        }
        return;
      }
    }
  };
  unsigned threads = cfg.threads ? cfg.threads : std::max(1U, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(R, 1)));
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (first_error) throw InconsistentState(failing);

  report.replicates = results;
  for (std::size_t m = 0; m < M && R > 0; ++m) {
    MethodSummary s;
    s.method = cfg.methods[m];
    s.replicates = static_cast<std::int64_t>(R);
    std::vector<double> means, lengths, f1, f2;
    double covered = 0.0;
    for (std::size_t r = 0; r < R; ++r) {
      const auto& x = results[r * M + m];
      means.push_back(x.post_mean);
      lengths.push_back(x.upper - x.lower);
      f1.push_back(x.rates.fmr1);
      f2.push_back(x.rates.fmr2);
      covered += x.covered;
    }
    s.post_mean = mean_and_se(means);
    s.length = mean_and_se(lengths);
    s.fmr1 = mean_and_se(f1);
    s.fmr2 = mean_and_se(f2);
    s.coverage = covered / static_cast<double>(R);
    report.methods.push_back(s);
  }
  return report;
}

}  // namespace bayeslink
