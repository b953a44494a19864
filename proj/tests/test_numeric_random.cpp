#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "bayeslink/numeric.hpp"
#include "bayeslink/random.hpp"
#include "oracles.hpp"

using namespace bayeslink;

TEST(Numeric, LogChoose) {
  EXPECT_NEAR(std::exp(log_choose(5, 2)), 10.0, 1e-12);
  EXPECT_NEAR(std::exp(log_choose(45, 20)) / 3169870830126.0, 1.0, 1e-13);
  EXPECT_EQ(log_choose(3, 4), kNegInf);
  EXPECT_EQ(log_choose(3, -1), kNegInf);
}

TEST(Numeric, LogSumExp) {
  const std::vector<double> xs = {std::log(1.0), std::log(2.0), kNegInf};
  EXPECT_NEAR(log_sum_exp(xs), std::log(3.0), 1e-15);
}

TEST(Numeric, EmpiricalQuantileIsSmallestReachingP) {
  const std::vector<int> xs = {1, 2, 3, 4};
  EXPECT_EQ(empirical_quantile<int>(xs, 0.25), 1);
  EXPECT_EQ(empirical_quantile<int>(xs, 0.26), 2);
  EXPECT_EQ(empirical_quantile<int>(xs, 0.5), 2);
  EXPECT_EQ(empirical_quantile<int>(xs, 1.0), 4);
  EXPECT_EQ(empirical_quantile<int>(xs, 0.0), 1);
}

TEST(Numeric, BatchMeansOnIid) {
  Rng rng(3);
  std::vector<double> xs;
  for (int i = 0; i < 100000; ++i) xs.push_back(uniform01(rng));
  const auto bm = batch_means(xs, 50);
  const auto iid = mean_and_se(xs);
  EXPECT_NEAR(bm.mean, iid.mean, 1e-12);
  EXPECT_NEAR(bm.se, iid.se, 0.5 * iid.se);
}

TEST(Random, DeriveSeedDeterministicAndDistinct) {
  EXPECT_EQ(derive_seed(7, 3), derive_seed(7, 3));
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(derive_seed(42, i));
  EXPECT_EQ(seen.size(), 1000u);
}

TEST(Random, Uniform01InUnitInterval) {
  Rng rng(1);
  for (int i = 0; i < 10000; ++i) {
    const double u = uniform01(rng);
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Random, HypergeometricPmf) {
  std::int64_t lo = 0, hi = 0;
  const auto p = hypergeometric_pmf(4, 2, 2, lo, hi);
  ASSERT_EQ(lo, 0);
  ASSERT_EQ(hi, 2);
  EXPECT_NEAR(p[0], 1.0 / 6, 1e-15);
  EXPECT_NEAR(p[1], 4.0 / 6, 1e-15);
  EXPECT_NEAR(p[2], 1.0 / 6, 1e-15);

  const auto r = hypergeometric_pmf(3, 1, 2, lo, hi);
  EXPECT_EQ(lo, 0);
  EXPECT_EQ(hi, 1);
  EXPECT_NEAR(r[0], 1.0 / 3, 1e-15);

  // Overlap is forced upward once fA + fB exceeds the population.
  const auto squeezed = hypergeometric_pmf(4, 3, 3, lo, hi);
  EXPECT_EQ(lo, 2);
  EXPECT_EQ(hi, 3);
  EXPECT_NEAR(squeezed[0], 0.75, 1e-15);

  const auto none = hypergeometric_pmf(5, 0, 3, lo, hi);
  EXPECT_EQ(lo, 0);
  EXPECT_EQ(hi, 0);
  EXPECT_NEAR(none[0], 1.0, 1e-15);
}

TEST(Random, HypergeometricDrawsMatchPmf) {
  Rng rng(9);
  std::int64_t lo = 0, hi = 0;
  const auto p = hypergeometric_pmf(20, 7, 9, lo, hi);
  std::vector<double> freq(p.size(), 0.0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) freq[static_cast<std::size_t>(draw_hypergeometric(20, 7, 9, rng) - lo)] += 1.0 / n;
  EXPECT_LT(oracle::total_variation(freq, p), 0.01);
}

TEST(Random, CategoricalRejectsZeroMass) {
  Rng rng(1);
  const std::vector<double> w = {0.0, 0.0};
  EXPECT_THROW(draw_categorical(w, rng), InconsistentState);
}

TEST(Random, TruncatedBetaMatchesCdf) {
  Rng rng(17);
  std::vector<double> xs;
  for (int i = 0; i < 100000; ++i) xs.push_back(draw_truncated_beta(5.0, 1.0, 0.5, 1.0, rng));
  // Beta(5, 1) on (1/2, 1): CDF (x^5 - 2^-5) / (1 - 2^-5).
  const double ks = oracle::ks_statistic(xs, [](double x) {
    return (std::pow(x, 5) - std::pow(0.5, 5)) / (1.0 - std::pow(0.5, 5));
  });
  EXPECT_LT(ks, 0.01);
  for (double x : xs) {
    ASSERT_GE(x, 0.5);
    ASSERT_LE(x, 1.0);
  }
}

TEST(Random, TruncatedBetaExtremeTail) {
  Rng rng(2);
  // Nearly all mass of Beta(1, 201) lies below 1/64.
  for (int i = 0; i < 1000; ++i) {
    const double x = draw_truncated_beta(1.0, 201.0, 1.0 / 64, 1.0, rng);
    ASSERT_GE(x, 1.0 / 64);
    ASSERT_LT(x, 0.1);
  }
}

TEST(Random, DirichletMoments) {
  Rng rng(23);
  const std::vector<double> alpha = {3.0, 1.0, 0.5};
  const double a0 = 4.5;
  const int n = 100000;
  std::vector<std::vector<double>> xs(3);
  for (int i = 0; i < n; ++i) {
    const auto d = draw_dirichlet(alpha, rng);
    ASSERT_NEAR(d[0] + d[1] + d[2], 1.0, 1e-12);
    for (int k = 0; k < 3; ++k) xs[k].push_back(d[k]);
  }
  for (int k = 0; k < 3; ++k) {
    const auto m = mean_and_se(xs[k]);
    EXPECT_LT(std::abs(m.mean - alpha[k] / a0), 3.0 * m.se) << k;
  }
}

TEST(Random, SampleWithoutReplacementDistinct) {
  Rng rng(4);
  for (int rep = 0; rep < 100; ++rep) {
    const auto idx = sample_without_replacement(10, 6, rng);
    std::set<std::size_t> s(idx.begin(), idx.end());
    EXPECT_EQ(s.size(), 6u);
    for (auto i : idx) EXPECT_LT(i, 10u);
  }
}
