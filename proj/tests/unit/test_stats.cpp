#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "../oracles/brute_force.hpp"
#include "disom/stats.hpp"

using namespace disom;

namespace {

std::vector<Observation> finished(std::initializer_list<std::uint64_t> ts) {
  std::vector<Observation> out;
  for (auto t : ts) out.push_back({t, false});
  return out;
}

const double kRs[] = {0.25, 0.10, 0.0, 1.0};

}  // namespace

TEST(Summary, MedianOfThree) {
  const auto s = summarize(finished({3, 1, 2}), kRs);
  ASSERT_TRUE(s.median);
  EXPECT_EQ(*s.median, 2.0);
  EXPECT_EQ(s.censored_fraction, 0.0);
}

TEST(Summary, FortyPercentCensored) {
  // 6 finished runs with t = 10..60, 4 censored.
  auto obs = finished({10, 20, 30, 40, 50, 60});
  for (int i = 0; i < 4; ++i) obs.push_back({999, true});
  const auto s = summarize(obs, kRs);
  EXPECT_DOUBLE_EQ(s.censored_fraction, 0.4);
  ASSERT_TRUE(s.median);
  EXPECT_EQ(*s.median, 55.0);  // between the 5th and 6th order statistics
  EXPECT_FALSE(s.monte_carlo.at(0.25));
  EXPECT_FALSE(s.monte_carlo.at(0.10));
  EXPECT_EQ(s.monte_carlo.at(1.0), 0U);
}

TEST(Summary, ZeroRIsMaximum) {
  const auto s = summarize(finished({5, 9, 2, 7}), kRs);
  EXPECT_EQ(s.monte_carlo.at(0.0), 9U);
  // 75% must finish: 3 of 4.
  EXPECT_EQ(s.monte_carlo.at(0.25), 7U);
}

TEST(Summary, AllCensored) {
  const std::vector<Observation> obs(5, Observation{100, true});
  const auto s = summarize(obs, kRs);
  EXPECT_FALSE(s.median);
  EXPECT_FALSE(s.monte_carlo.at(0.25));
  EXPECT_EQ(s.censored, 5U);
  EXPECT_THROW(summarize(std::vector<Observation>{}, kRs), DomainError);
}

TEST(Summary, AgreesWithNaiveOracle) {
  std::mt19937_64 rng(77);
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t m = 1 + rng() % 40;
    const double cens = std::uniform_real_distribution<double>(0, 0.7)(rng);
    std::vector<Observation> obs;
    std::vector<oracle::Obs> naive;
    for (std::size_t i = 0; i < m; ++i) {
      const bool c = std::bernoulli_distribution(cens)(rng);
      const std::uint64_t t = 1 + rng() % 50;
      obs.push_back({t, c});
      naive.push_back({t, c});
    }
    const double rs[] = {0.0, 0.1, 0.25, 0.5, 1.0};
    const auto s = summarize(obs, rs);
    EXPECT_EQ(s.median, oracle::naive_median(naive)) << rep;
    for (double r : rs) EXPECT_EQ(s.monte_carlo.at(r), oracle::naive_mc_runtime(naive, r)) << rep << " r=" << r;
  }
}

TEST(Summary, CensoredNeverReportedAsFinished) {
  // A censored value smaller than every finished one must not lower the quantiles.
  std::vector<Observation> obs = finished({100, 200, 300});
  obs.push_back({1, true});
  const auto s = summarize(obs, kRs);
  ASSERT_TRUE(s.median);
  EXPECT_EQ(*s.median, 250.0);
  EXPECT_EQ(s.monte_carlo.at(0.25), 300U);
  EXPECT_TRUE(s.sorted.back().censored);
}

TEST(Dkw, Formula) {
  EXPECT_NEAR(dkw_band(2000, 2000, 0.999), std::sqrt(std::log(2000.0) / 2 * 4000 / (2000.0 * 2000)), 1e-12);
  EXPECT_NEAR(dkw_band(2000, 2000, 0.999), 0.0617, 1e-4);
  EXPECT_THROW(dkw_band(0, 10, 0.9), DomainError);
}

TEST(Ecdf, ExcessExamples) {
  // a finishes at 1, 2; b finishes at 3, 4: F_a - F_b peaks at 1 for t in [2, 3).
  const auto e = max_ecdf_excess(finished({1, 2}), finished({3, 4}));
  EXPECT_DOUBLE_EQ(e.max_excess, 1.0);
  EXPECT_EQ(e.at, 2U);
  EXPECT_DOUBLE_EQ(max_ecdf_excess(finished({3, 4}), finished({1, 2})).max_excess, 0.0);
  std::vector<Observation> cens{{1, true}, {1, true}};
  EXPECT_DOUBLE_EQ(max_ecdf_excess(cens, finished({5})).max_excess, 0.0);
}

TEST(Ecdf, MatchesBruteForceSupremum) {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<Observation> a, b;
    std::vector<oracle::Obs> na, nb;
    for (int i = 0; i < 1 + static_cast<int>(rng() % 20); ++i) {
      Observation o{rng() % 30, rng() % 5 == 0};
      a.push_back(o);
      na.push_back({o.evaluations, o.censored});
    }
    for (int i = 0; i < 1 + static_cast<int>(rng() % 20); ++i) {
      Observation o{rng() % 30, rng() % 5 == 0};
      b.push_back(o);
      nb.push_back({o.evaluations, o.censored});
    }
    double best = 0;
    for (std::uint64_t t = 0; t < 30; ++t) best = std::max(best, oracle::finished_by(na, t) - oracle::finished_by(nb, t));
    EXPECT_NEAR(max_ecdf_excess(a, b).max_excess, best, 1e-12);
  }
}

TEST(Fit, NLogNExact) {
  std::vector<ScalingPoint> pts;
  for (double n : {1024.0, 4096.0, 16384.0, 65536.0}) pts.push_back({n, 7 * n * std::log(n)});
  const auto fit = fit_scaling(pts, ScalingModel::n_log_n);
  EXPECT_NEAR(fit.ratio_spread, 1.0, 1e-12);
  EXPECT_NEAR(fit.constant, 7.0, 1e-9);
  for (double r : fit.residuals) EXPECT_NEAR(r, 0.0, 1e-12);
}

TEST(Fit, PowerLawExact) {
  std::vector<ScalingPoint> pts;
  for (double inv_p : {10.0, 20.0, 40.0, 80.0}) pts.push_back({inv_p, 5 * inv_p});
  const auto fit = fit_scaling(pts, ScalingModel::power_law);
  EXPECT_NEAR(fit.exponent, 1.0, 1e-12);
  EXPECT_NEAR(fit.constant, 5.0, 1e-9);
}

TEST(Fit, JitteredSlopeStaysNearOne) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> jitter(0.9, 1.1);
  std::vector<ScalingPoint> pts;
  for (double x = 10; x <= 10000; x *= 2) pts.push_back({x, 3 * x * jitter(rng)});
  const auto fit = fit_scaling(pts, ScalingModel::power_law);
  EXPECT_GE(fit.exponent, 0.9);
  EXPECT_LE(fit.exponent, 1.1);
}

TEST(Fit, NonFiniteExcluded) {
  std::vector<ScalingPoint> pts{{10, 10}, {20, 20}, {40, INFINITY}, {80, 80}, {160, NAN}, {320, 320}};
  const auto fit = fit_scaling(pts, ScalingModel::power_law);
  EXPECT_EQ(fit.points.size(), 4U);
  EXPECT_EQ(fit.excluded, (std::vector<std::size_t>{2, 4}));
  EXPECT_NEAR(fit.exponent, 1.0, 1e-12);
}

TEST(Fit, TooFewPointsThrow) {
  std::vector<ScalingPoint> pts{{10, 10}, {20, INFINITY}, {30, 30}};
  EXPECT_THROW(fit_scaling(pts, ScalingModel::power_law), DomainError);
  std::vector<ScalingPoint> same{{10, 1}, {10, 2}, {10, 3}};
  EXPECT_THROW(fit_scaling(same, ScalingModel::power_law), DomainError);
}
