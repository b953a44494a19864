#include <gtest/gtest.h>

#include <cmath>

#include "bayeslink/popsize.hpp"
#include "oracles.hpp"

using namespace bayeslink;

namespace {

PriorConfig gamma_prior(double g) {
  PriorConfig p;
  p.g = g;
  return p;
}

PriorConfig inverse_square() {
  PriorConfig p;
  p.n_prior_form = NPriorForm::inverse_square;
  return p;
}

}  // namespace

TEST(NPosterior, TableOneQuantiles) {
  const std::int64_t lo[] = {57, 56, 54, 53, 51, 50, 49};
  const std::int64_t mid[] = {64, 62, 59, 57, 55, 53, 51};
  const std::int64_t hi[] = {78, 74, 70, 66, 63, 60, 57};
  for (std::int64_t T = 24; T <= 30; ++T) {
    const auto post = n_posterior(T, 34, 45, inverse_square());
    const auto r = static_cast<std::size_t>(T - 24);
    EXPECT_EQ(post.quantile(0.025), lo[r]) << T;
    EXPECT_EQ(post.quantile(0.5), mid[r]) << T;
    EXPECT_EQ(post.quantile(0.975), hi[r]) << T;
  }
}

TEST(NPosterior, FullOverlapPutsModeAtLowerBound) {
  const auto post = n_posterior(5, 5, 5, gamma_prior(2.0));
  EXPECT_EQ(post.first, 5);
  std::size_t mode = 0;
  for (std::size_t i = 1; i < post.pmf.size(); ++i) {
    if (post.pmf[i] > post.pmf[mode]) mode = i;
  }
  EXPECT_EQ(mode, 0u);
}

TEST(NPosterior, SupportStartsAtDistinctUnits) {
  EXPECT_EQ(n_posterior(3, 10, 7, gamma_prior(2.0)).first, 14);
  EXPECT_EQ(n_posterior(7, 10, 7, gamma_prior(2.0)).first, 10);
}

TEST(NPosterior, MatchesBruteForceNormalization) {
  for (auto form : {NPriorForm::gamma_form, NPriorForm::inverse_square}) {
    for (bool factor : {false, true}) {
      PriorConfig prior;
      prior.n_prior_form = form;
      prior.capture_prior_factor = factor;
      const std::int64_t T = 6, nA = 12, nB = 9;
      const auto post = n_posterior(T, nA, nB, prior);
      std::vector<double> w;
      double z = 0.0;
      for (std::int64_t N = nA + nB - T; N < 200'000; ++N) {
        w.push_back(std::exp(log_n_posterior_kernel(N, T, nA, nB, prior)));
        z += w.back();
      }
      double tv = 0.0;
      for (std::size_t i = 0; i < w.size(); ++i) {
        tv += std::abs(w[i] / z - post.prob(post.first + static_cast<std::int64_t>(i)));
      }
      EXPECT_LT(0.5 * tv, 1e-6);
      double s = 0.0;
      for (double p : post.pmf) s += p;
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST(NPosterior, NonIntegrableTails) {
  EXPECT_THROW(n_posterior(0, 10, 10, gamma_prior(0.0)), NonIntegrablePosterior);
  EXPECT_THROW(n_posterior(1, 10, 10, gamma_prior(0.0)), NonIntegrablePosterior);
  EXPECT_NO_THROW(n_posterior(2, 10, 10, gamma_prior(0.0)));
}

TEST(NPosterior, CapMakesEverythingProper) {
  auto prior = gamma_prior(0.0);
  prior.n_cap = 40;
  const auto post = n_posterior(0, 10, 10, prior);
  EXPECT_EQ(post.first, 20);
  EXPECT_EQ(post.last(), 40);
  EXPECT_THROW(n_posterior(11, 10, 10, prior), InconsistentState);
}

TEST(NPosterior, SamplerMatchesPmf) {
  const auto post = n_posterior(26, 34, 45, gamma_prior(2.0));
  Rng rng(99);
  std::vector<double> freq(post.pmf.size(), 0.0);
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    freq[static_cast<std::size_t>(post.sample(rng) - post.first)] += 1.0 / n;
  }
  Rng r1(5), r2(5);
  EXPECT_EQ(sample_N(26, 34, 45, gamma_prior(2.0), 1e-12, r1), post.sample(r2));
  EXPECT_LT(oracle::total_variation(freq, post.pmf), 0.01);
}

TEST(NPosterior, HeavyTailUsesBins) {
  const auto post = n_posterior(1, 30, 30, gamma_prior(2.0));
  ASSERT_FALSE(post.tail.empty());
  EXPECT_EQ(post.tail.front().lo, post.last_explicit() + 1);
  double mass = post.cdf.back();
  for (const auto& b : post.tail) mass += b.mass;
  EXPECT_NEAR(mass, 1.0, 1e-12);
  EXPECT_NEAR(post.tail.back().cdf, 1.0, 1e-12);

  // Relative masses against direct summation over the first few million points.
  const std::int64_t M = 3'000'000;
  double direct_low = 0.0, direct_all = 0.0;
  for (std::int64_t N = post.first; N <= M; ++N) {
    const double w = std::exp(log_n_posterior_kernel(N, 1, 30, 30, gamma_prior(2.0)) -
                              log_n_posterior_kernel(post.first + 800, 1, 30, 30, gamma_prior(2.0)));
    direct_all += w;
    if (N <= 5000) direct_low += w;
  }
  double low = 0.0, all = 0.0;
  for (std::int64_t N = post.first; N <= post.last_explicit(); ++N) {
    all += post.prob(N);
    if (N <= 5000) low += post.prob(N);
  }
  for (const auto& b : post.tail) {
    if (b.hi <= M) {
      all += b.mass;
    } else if (b.lo <= M) {
      all += post.tail_integral(static_cast<double>(b.lo), static_cast<double>(M));
    }
  }
  EXPECT_NEAR(low / all, direct_low / direct_all, 1e-9);

  // A quantile inside the binned tail brackets its probability.
  const double p = 1.0 - 0.5 * (1.0 - post.cdf.back());
  const auto q = post.quantile(p);
  ASSERT_GT(q, post.last_explicit());
  auto cdf_at = [&](std::int64_t x) {
    double c = post.cdf.back();
    for (const auto& b : post.tail) {
      if (b.hi <= x) {
        c += b.mass;
      } else if (b.lo <= x) {
        c += post.tail_integral(static_cast<double>(b.lo), static_cast<double>(x));
      }
    }
    return c;
  };
  EXPECT_GE(cdf_at(q), p - 1e-12);
  EXPECT_LT(cdf_at(q - 1), p);

  // Draws land in the tail at the right rate.
  Rng rng(17);
  const int n = 200000;
  int beyond = 0;
  for (int i = 0; i < n; ++i) beyond += post.sample(rng) > post.last_explicit();
  const double rate = 1.0 - post.cdf.back();
  EXPECT_NEAR(beyond / double(n), rate, 4.0 * std::sqrt(rate * (1 - rate) / n) + 1e-4);
}

TEST(NPosterior, NoOverlapWithDefaultPriorIsProper) {
  const auto post = n_posterior(0, 5, 5, gamma_prior(2.0));
  EXPECT_FALSE(post.tail.empty());
  EXPECT_NEAR(post.tail.back().cdf, 1.0, 1e-12);
  EXPECT_GT(post.quantile(0.975), post.quantile(0.5));
}

TEST(Chapman, KnownValues) {
  EXPECT_NEAR(chapman_estimate(34, 45, 25), 35.0 * 46.0 / 26.0, 1e-12);
  EXPECT_NEAR(chapman_estimate(34, 45, 25), 61.923, 1e-3);
  EXPECT_DOUBLE_EQ(chapman_estimate(3, 3, 0), 16.0);
}
