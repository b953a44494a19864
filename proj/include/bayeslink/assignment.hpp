#pragma once

// Maximum-weight bipartite matching via the Hungarian algorithm (shortest
// augmenting paths with potentials, O(n^2 m)).

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "bayeslink/core.hpp"

namespace bayeslink {

namespace detail {

// Minimum-cost assignment of every row to a distinct column; rows <= cols.
// cost is row-major rows x cols. Returns the column of each row.
inline std::vector<std::size_t> hungarian_min(const std::vector<double>& cost, std::size_t rows,
                                              std::size_t cols) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(rows + 1, 0.0), v(cols + 1, 0.0);
  std::vector<std::size_t> p(cols + 1, 0), way(cols + 1, 0);
  for (std::size_t i = 1; i <= rows; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(cols + 1, inf);
    std::vector<char> used(cols + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= cols; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * cols + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= cols; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> col_of(rows, 0);
  for (std::size_t j = 1; j <= cols; ++j) {
    if (p[j] != 0) col_of[p[j] - 1] = j - 1;
  }
  return col_of;
}

}  // namespace detail

// Matching maximizing the summed weight of its pairs; only pairs with strictly
// positive weight are ever returned. weights is row-major nA x nB and may hold
// -inf; +inf entries are preferred over any combination of finite ones.
inline MatchingMatrix max_weight_matching(const std::vector<double>& weights, std::size_t nA,
                                          std::size_t nB) {
  MatchingMatrix out(nA, nB);
  if (nA == 0 || nB == 0) return out;
  double finite_sum = 0.0;
  for (double w : weights) {
    if (std::isfinite(w) && w > 0.0) finite_sum += w;
  }
  const double big = 1.0 + 2.0 * finite_sum;
  auto clipped = [&](std::size_t a, std::size_t b) {
    const double w = weights[a * nB + b];
    if (std::isnan(w) || w <= 0.0) return 0.0;
    return std::isinf(w) ? big : w;
  };

  const bool transpose = nA > nB;
  const std::size_t rows = transpose ? nB : nA;
  const std::size_t cols = transpose ? nA : nB;
  std::vector<double> cost(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      cost[r * cols + c] = transpose ? -clipped(c, r) : -clipped(r, c);
    }
  }
  const auto col_of = detail::hungarian_min(cost, rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t a = transpose ? col_of[r] : r;
    const std::size_t b = transpose ? r : col_of[r];
    if (clipped(a, b) > 0.0) out.add(a, b);
  }
  return out;
}

}  // namespace bayeslink
