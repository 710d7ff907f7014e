#include <gtest/gtest.h>

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/lognormal.hpp>
#include <boost/math/distributions/weibull.hpp>

#include <random>

#include "dart/delay_dist.hpp"
#include "dart/latent_model.hpp"

using namespace dart;

namespace {

// Per-day mass from the closed-form CDF, thresholded and renormalised the
// same way: the contiguous run of bins >= threshold around the mode.
template <typename Dist>
std::pair<int, std::vector<double>> cdf_oracle(const Dist& dist, double threshold, int first_day, int max_span) {
  std::vector<double> mass;
  for (int k = first_day; k <= max_span; ++k) {
    mass.push_back(boost::math::cdf(dist, k + 1.0) - (k == 0 ? 0.0 : boost::math::cdf(dist, static_cast<double>(k))));
  }
  std::size_t mode = 0;
  for (std::size_t k = 1; k < mass.size(); ++k) {
    if (mass[k] > mass[mode]) mode = k;
  }
  std::size_t lo = mode, hi = mode;
  while (lo > 0 && mass[lo - 1] >= threshold) --lo;
  while (hi + 1 < mass.size() && mass[hi + 1] >= threshold) ++hi;
  std::vector<double> kept(mass.begin() + static_cast<long>(lo), mass.begin() + static_cast<long>(hi) + 1);
  double total = 0.0;
  for (double v : kept) total += v;
  for (double& v : kept) v /= total;
  return {first_day + static_cast<int>(lo), kept};
}

}  // namespace

TEST(Discretize, GammaGenerationTimeMatchesCdfOracle) {
  DiscretizeOptions opts;
  opts.first_day = 1;
  const auto pmf = discretize({DelayFamily::Gamma, 4.44, 1.89}, 0.1, true, opts);
  const auto [offset, probs] = cdf_oracle(boost::math::gamma_distribution<>(4.44, 1.89), 0.1, 1, 60);
  ASSERT_EQ(pmf.offset_start(), offset);
  ASSERT_EQ(pmf.size(), probs.size());
  for (std::size_t k = 0; k < probs.size(); ++k) EXPECT_NEAR(pmf.probs()[k], probs[k], 1e-6);
  EXPECT_EQ(pmf.offset_start(), 5);
  EXPECT_EQ(pmf.span(), 7);
}

TEST(Discretize, LognormalIncubationMatchesCdfOracle) {
  const auto pmf = discretize({DelayFamily::Lognormal, 1.644, 0.363}, 0.1);
  const auto [offset, probs] = cdf_oracle(boost::math::lognormal_distribution<>(1.644, 0.363), 0.1, 0, 60);
  ASSERT_EQ(pmf.offset_start(), offset);
  ASSERT_EQ(pmf.size(), probs.size());
  for (std::size_t k = 0; k < probs.size(); ++k) EXPECT_NEAR(pmf.probs()[k], probs[k], 1e-6);
  EXPECT_EQ(min_delay(pmf), 3);
}

TEST(Discretize, WeibullMatchesCdfOracle) {
  const auto pmf = discretize({DelayFamily::Weibull, 2.826, 5.665}, 0.05);
  const auto [offset, probs] = cdf_oracle(boost::math::weibull_distribution<>(2.826, 5.665), 0.05, 0, 60);
  ASSERT_EQ(pmf.offset_start(), offset);
  ASSERT_EQ(pmf.size(), probs.size());
  for (std::size_t k = 0; k < probs.size(); ++k) EXPECT_NEAR(pmf.probs()[k], probs[k], 1e-6);
}

TEST(Discretize, DefaultSettingsGiveHistoryLengthSeven) {
  DiscretizeOptions opts;
  opts.first_day = 1;
  ModelParams p;
  p.w = discretize({DelayFamily::Gamma, 4.44, 1.89}, 0.1, true, opts);
  p.kernel = {ObservationKind::Onset, discretize({DelayFamily::Lognormal, 1.644, 0.363}, 0.1), 1.0};
  EXPECT_EQ(p.history_length(), 7);
}

TEST(Discretize, ZeroThresholdKeepsWholeSpanAndSumsToOne) {
  const auto pmf = discretize({DelayFamily::Gamma, 2.0, 1.5}, 0.0);
  EXPECT_EQ(pmf.offset_start(), 0);
  EXPECT_EQ(pmf.span(), 60);
  EXPECT_NEAR(pmf.total(), 1.0, 1e-9);
}

TEST(Discretize, UnnormalisedKeepsRawBinMass) {
  const auto raw = discretize({DelayFamily::Lognormal, 1.644, 0.363}, 0.1, false);
  const boost::math::lognormal_distribution<> dist(1.644, 0.363);
  for (int day = raw.offset_start(); day <= raw.span(); ++day) {
    EXPECT_NEAR(raw.at(day), boost::math::cdf(dist, day + 1.0) - boost::math::cdf(dist, static_cast<double>(day)), 1e-7);
  }
  EXPECT_LT(raw.total(), 1.0);
}

TEST(Discretize, MonotoneInThreshold) {
  const ContinuousDelaySpec spec{DelayFamily::Gamma, 4.44, 1.89};
  int prev_lo = -1, prev_hi = 1000;
  for (double th : {0.0, 0.01, 0.05, 0.08, 0.1, 0.11}) {
    const auto pmf = discretize(spec, th);
    EXPECT_GE(pmf.offset_start(), prev_lo);
    EXPECT_LE(pmf.span(), prev_hi);
    prev_lo = pmf.offset_start();
    prev_hi = pmf.span();
  }
}

TEST(Discretize, Errors) {
  EXPECT_THROW(discretize({DelayFamily::Gamma, -1.0, 1.0}, 0.1), InvalidSpec);
  EXPECT_THROW(discretize({DelayFamily::Lognormal, 1.0, 0.0}, 0.1), InvalidSpec);
  EXPECT_THROW(discretize({DelayFamily::Gamma, 4.44, 1.89}, 1.0), InvalidSpec);
  EXPECT_THROW(discretize({DelayFamily::Gamma, 4.44, 1.89}, 0.9), EmptySupport);
}

TEST(Convolve, IdentityAndShift) {
  const DelayPMF b(2, {0.2, 0.5, 0.3});
  EXPECT_EQ(convolve(DelayPMF::point_mass(0), b), b);
  const auto shifted = convolve(DelayPMF::point_mass(3), DelayPMF::point_mass(2));
  EXPECT_EQ(shifted.offset_start(), 5);
  ASSERT_EQ(shifted.size(), 1u);
  EXPECT_DOUBLE_EQ(shifted.probs()[0], 1.0);
}

TEST(Convolve, HandExample) {
  const DelayPMF a(1, {0.5, 0.5});
  const auto c = convolve(a, a);
  EXPECT_EQ(c.offset_start(), 2);
  ASSERT_EQ(c.size(), 3u);
  EXPECT_DOUBLE_EQ(c.at(2), 0.25);
  EXPECT_DOUBLE_EQ(c.at(3), 0.5);
  EXPECT_DOUBLE_EQ(c.at(4), 0.25);
}

TEST(Convolve, MeanAdditivityOnRandomPairs) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> len(1, 12), off(0, 6);
  for (int trial = 0; trial < 50; ++trial) {
    auto make = [&] {
      std::vector<double> p(static_cast<std::size_t>(len(rng)));
      for (double& v : p) v = u(rng) + 1e-3;
      return DelayPMF(off(rng), std::move(p)).normalized();
    };
    const auto a = make(), b = make();
    const auto c = convolve(a, b);
    EXPECT_NEAR(c.mean(), a.mean() + b.mean(), 1e-9);
    EXPECT_NEAR(c.total(), 1.0, 1e-9);
  }
}

TEST(DelayPMF, Accessors) {
  const DelayPMF p(4, {1.0});
  EXPECT_EQ(min_delay(p), 4);
  EXPECT_EQ(min_delay(DelayPMF(0, {0.5, 0.5})), 0);
  EXPECT_DOUBLE_EQ(p.at(3), 0.0);
  EXPECT_THROW(DelayPMF(-1, {1.0}), InvalidSpec);
  EXPECT_THROW(DelayPMF(0, {}), EmptySupport);
  EXPECT_THROW(DelayPMF(0, {0.5, -0.1}), InvalidSpec);
}

TEST(ContinuousDelaySpec, DensitiesIntegrateToOne) {
  for (const ContinuousDelaySpec spec : {ContinuousDelaySpec{DelayFamily::Gamma, 4.44, 1.89},
                                          ContinuousDelaySpec{DelayFamily::Lognormal, 1.644, 0.363},
                                          ContinuousDelaySpec{DelayFamily::Weibull, 2.826, 5.665}}) {
    double total = 0.0;
    for (int day = 0; day < 200; ++day) total += day_bin_mass(spec, day, 1000);
    EXPECT_NEAR(total, 1.0, 1e-6) << to_string(spec.family);
  }
}
