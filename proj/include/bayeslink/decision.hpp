#pragma once

// Decision theory for matching matrices: loss functions, the Bayes point
// estimate under quadratic / absolute-error loss, and the false match rates
// used to score point estimates against a known truth.

#include <algorithm>
#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "bayeslink/core.hpp"
#include "bayeslink/errors.hpp"

namespace bayeslink {

using Pair = std::pair<std::size_t, std::size_t>;

// Marginal posterior match probabilities p(C_ab = 1 | data); absent pairs are 0.
struct PairPosterior {
  std::size_t nA = 0;
  std::size_t nB = 0;
  std::map<Pair, double> probs;

  double prob(std::size_t a, std::size_t b) const {
    auto it = probs.find({a, b});
    return it == probs.end() ? 0.0 : it->second;
  }

  void validate() const {
    for (const auto& [ab, p] : probs) {
      if (ab.first >= nA || ab.second >= nB) {
        throw DimensionMismatch("pair probability outside the " + std::to_string(nA) + "x" +
                                std::to_string(nB) + " grid");
      }
      if (!(p >= 0.0 && p <= 1.0)) throw SchemaError("pair probability outside [0, 1]");
    }
  }
};

enum class LossKind { quadratic, abs, fmr, tot };

namespace detail {
inline void check_same_shape(const MatchingMatrix& x, const MatchingMatrix& y) {
  if (x.nA() != y.nA() || x.nB() != y.nB()) {
    throw DimensionMismatch("matching matrices have different dimensions");
  }
}

// |x ∩ y|
inline std::size_t common_pairs(const MatchingMatrix& x, const MatchingMatrix& y) {
  std::size_t n = 0;
  for (auto [a, b] : x.pairs()) n += y.contains(a, b);
  return n;
}
}  // namespace detail

inline double loss(LossKind kind, const MatchingMatrix& truth, const MatchingMatrix& G) {
  detail::check_same_shape(truth, G);
  const auto both = static_cast<double>(detail::common_pairs(truth, G));
  const auto declared = static_cast<double>(G.T());
  const auto real = static_cast<double>(truth.T());
  const double false_matches = declared - both;
  const double missed = real - both;
  switch (kind) {
    case LossKind::quadratic:
    case LossKind::abs:
      return false_matches + missed;
    case LossKind::fmr:
      return declared == 0.0 ? 0.0 : false_matches / declared;
    case LossKind::tot: {
      const double fmr = declared == 0.0 ? 0.0 : false_matches / declared;
      const double undeclared = static_cast<double>(G.nA() * G.nB()) - declared;
      return fmr + (undeclared == 0.0 ? 0.0 : missed / undeclared);
    }
  }
  return 0.0;
}

struct BayesEstimate {
  MatchingMatrix G;
  // True when two pairs above 1/2 shared a row or column and one was dropped.
  bool conflicts_resolved = false;
};

// Declares every pair whose marginal match probability exceeds 1/2. If that
// breaks the one-to-one constraint, the more probable pair wins (ties go to the
// lexicographically smaller pair) and the event is flagged.
inline BayesEstimate bayes_estimate(const PairPosterior& post) {
  post.validate();
  std::vector<std::pair<double, Pair>> above;
  for (const auto& [ab, p] : post.probs) {
    if (p > 0.5) above.emplace_back(p, ab);
  }
  std::stable_sort(above.begin(), above.end(),
                   [](const auto& x, const auto& y) { return x.first > y.first; });
  BayesEstimate out{MatchingMatrix(post.nA, post.nB), false};
  for (const auto& [p, ab] : above) {
    if (out.G.partner_of_a(ab.first) == MatchingMatrix::npos &&
        out.G.partner_of_b(ab.second) == MatchingMatrix::npos) {
      out.G.add(ab.first, ab.second);
    } else {
      out.conflicts_resolved = true;
    }
  }
  return out;
}

struct ErrorRates {
  double fmr1 = 0.0;  // false declared matches / declared matches
  double fmr2 = 0.0;  // missed true matches / true matches
};

inline ErrorRates error_rates(const MatchingMatrix& truth, const MatchingMatrix& estimate) {
  detail::check_same_shape(truth, estimate);
  const auto both = static_cast<double>(detail::common_pairs(truth, estimate));
  ErrorRates r;
  if (estimate.T() > 0) r.fmr1 = (static_cast<double>(estimate.T()) - both) / estimate.T();
  if (truth.T() > 0) r.fmr2 = (static_cast<double>(truth.T()) - both) / truth.T();
  return r;
}

// Every one-to-one matching of an nA x nB grid. Exponential; for small grids only.
inline std::vector<MatchingMatrix> enumerate_matchings(std::size_t nA, std::size_t nB) {
  std::vector<MatchingMatrix> out;
  MatchingMatrix cur(nA, nB);
  auto rec = [&](auto&& self, std::size_t a) -> void {
    if (a == nA) {
      out.push_back(cur);
      return;
    }
    self(self, a + 1);
    for (std::size_t b = 0; b < nB; ++b) {
      if (cur.partner_of_b(b) != MatchingMatrix::npos) continue;
      cur.add(a, b);
      self(self, a + 1);
      cur.remove(a, b);
    }
  };
  rec(rec, 0);
  return out;
}

}  // namespace bayeslink
