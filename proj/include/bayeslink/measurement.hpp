#pragma once

// Hit-miss measurement error: each field is recorded as its true value with
// probability beta_i, otherwise it is a uniform draw over the k_i categories.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "bayeslink/core.hpp"
#include "bayeslink/errors.hpp"

namespace bayeslink {

struct HitMissParams {
  std::vector<double> beta;

  explicit HitMissParams(std::vector<double> b = {}) : beta(std::move(b)) {
    for (double v : beta) {
      if (!(v >= 0.0 && v <= 1.0)) throw SchemaError("hit-miss beta outside [0, 1]");
    }
  }
};

inline double component_prob(Code x, Code mu, double beta, Code k) {
  return (x == mu ? beta : 0.0) + (1.0 - beta) / static_cast<double>(k);
}

inline double record_loglik(std::span<const Code> x, std::span<const Code> mu,
                            const HitMissParams& params, const KeySchema& schema) {
  if (x.size() != schema.h() || mu.size() != schema.h() || params.beta.size() != schema.h()) {
    throw DimensionMismatch("record, true value and beta must all have h entries");
  }
  double ll = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    ll += std::log(component_prob(x[i], mu[i], params.beta[i], schema.k(i)));
  }
  return ll;
}

// Units of one file whose observed value of variable i equals the true one.
inline std::size_t hit_count(const RecordTable& x, std::span<const CellIndex> mu,
                             const KeySchema& schema, std::size_t i) {
  if (x.n() != mu.size()) throw DimensionMismatch("observed and true tables are not aligned");
  std::size_t hits = 0;
  for (std::size_t s = 0; s < x.n(); ++s) hits += x.at(s, i) == schema.code_at(mu[s], i);
  return hits;
}

// The same tally over both files jointly.
inline std::size_t hit_count(const RecordTable& xA, std::span<const CellIndex> muA,
                             const RecordTable& xB, std::span<const CellIndex> muB,
                             const KeySchema& schema, std::size_t i) {
  return hit_count(xA, muA, schema, i) + hit_count(xB, muB, schema, i);
}

}  // namespace bayeslink
