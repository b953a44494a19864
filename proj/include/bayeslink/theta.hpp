#pragma once

// Superpopulation cell probabilities stored as one probability table per
// Dirichlet block of the independence pattern; theta_j is the product of the
// block entries that cell j projects onto. Nothing of size K is materialized.

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "bayeslink/core.hpp"
#include "bayeslink/random.hpp"

namespace bayeslink {

// theta functional P(X_var = code), summed over all other variables.
struct ThetaMargin {
  std::size_t var = 0;  // 0-based
  Code code = 1;

  std::string name() const {
    return "theta[" + std::to_string(var + 1) + "=" + std::to_string(code) + "]";
  }
};

class ThetaBlocks {
 public:
  ThetaBlocks() = default;

  static ThetaBlocks uniform(const KeySchema& schema) {
    ThetaBlocks t;
    for (const auto& block : schema.blocks()) {
      t.probs_.emplace_back(block.size, 1.0 / static_cast<double>(block.size));
    }
    t.rebuild_cdf();
    return t;
  }

  static ThetaBlocks from_tables(std::vector<std::vector<double>> tables) {
    ThetaBlocks t;
    t.probs_ = std::move(tables);
    t.rebuild_cdf();
    return t;
  }

  const std::vector<std::vector<double>>& tables() const noexcept { return probs_; }

  double value(const KeySchema& schema, CellIndex cell) const {
    double p = 1.0;
    for (std::size_t b = 0; b < probs_.size(); ++b) p *= probs_[b][schema.block_offset(cell, b)];
    return p;
  }

  double margin(const KeySchema& schema, const ThetaMargin& m) const {
    const std::size_t b = schema.block_of(m.var);
    double s = 0.0;
    for (std::uint64_t off = 0; off < probs_[b].size(); ++off) {
      if (schema.block_code(b, off, m.var) == m.code) s += probs_[b][off];
    }
    return s;
  }

  // A cell drawn from theta: each block independently, then composed.
  CellIndex draw_cell(const KeySchema& schema, Rng& rng) const {
    std::vector<Code> codes(schema.h());
    for (std::size_t b = 0; b < probs_.size(); ++b) {
      const auto& cdf = cdf_[b];
      const double u = uniform01(rng) * cdf.back();
      auto off = static_cast<std::uint64_t>(std::upper_bound(cdf.begin(), cdf.end(), u) -
                                            cdf.begin());
      off = std::min<std::uint64_t>(off, cdf.size() - 1);
      while (probs_[b][off] <= 0.0 && off > 0) --off;
      const auto& block = schema.blocks()[b];
      for (std::size_t g = 0; g < block.vars.size(); ++g) {
        codes[block.vars[g]] = schema.block_code(b, off, block.vars[g]);
      }
    }
    return schema.cell_of(codes);
  }

 private:
  void rebuild_cdf() {
    cdf_.clear();
    for (const auto& p : probs_) {
      std::vector<double> c(p.size());
      double acc = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) {
        acc += p[i];
        c[i] = acc;
      }
      cdf_.push_back(std::move(c));
    }
  }

  std::vector<std::vector<double>> probs_;
  std::vector<std::vector<double>> cdf_;
};

}  // namespace bayeslink
