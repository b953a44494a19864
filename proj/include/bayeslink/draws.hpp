#pragma once

// Retained MCMC output shared by the hierarchical sampler and the comparison
// vector chain: N and T per retained iteration, a set of named scalar
// parameters, and how often each pair was matched.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "bayeslink/decision.hpp"
#include "bayeslink/errors.hpp"

namespace bayeslink {

struct PosteriorDraws {
  std::size_t nA = 0;
  std::size_t nB = 0;
  std::vector<std::int64_t> iteration;
  std::vector<std::int64_t> N;
  std::vector<std::int64_t> T;
  std::vector<std::string> param_names;
  std::vector<std::vector<double>> params;  // one row per retained iteration
  bool has_pairs = false;
  std::map<Pair, std::uint64_t> pair_match_counts;

  std::size_t retained() const noexcept { return N.size(); }

  std::vector<double> column(const std::string& name) const {
    auto it = std::find(param_names.begin(), param_names.end(), name);
    if (it == param_names.end()) throw ConfigError("no parameter named " + name);
    const auto c = static_cast<std::size_t>(it - param_names.begin());
    std::vector<double> out;
    out.reserve(params.size());
    for (const auto& row : params) out.push_back(row[c]);
    return out;
  }

  PairPosterior pair_posterior() const {
    PairPosterior post{nA, nB, {}};
    if (retained() == 0) return post;
    for (const auto& [ab, count] : pair_match_counts) {
      post.probs[ab] = static_cast<double>(count) / static_cast<double>(retained());
    }
    return post;
  }

  bool operator==(const PosteriorDraws&) const = default;
};

}  // namespace bayeslink
