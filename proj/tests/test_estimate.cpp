#include <gtest/gtest.h>

#include <cmath>

#include "dart/estimate.hpp"
#include "dart/scenario.hpp"

using namespace dart;

namespace {

DelayPMF gen_time() {
  DiscretizeOptions opts;
  opts.first_day = 1;
  return discretize({DelayFamily::Gamma, 4.44, 1.89}, 0.1, true, opts);
}

ObservationKernel onset_kernel() {
  return {ObservationKind::Onset, discretize({DelayFamily::Lognormal, 1.644, 0.363}, 0.1), 1.0};
}

ScenarioConfig scenario_config() {
  ScenarioConfig sc;
  sc.generation_time = gen_time();
  sc.kernel = onset_kernel();
  return sc;
}

ModelParams params() {
  ModelParams p;
  p.w = gen_time();
  p.kernel = onset_kernel();
  return p;
}

}  // namespace

TEST(Summarize, PointMassEnsemble) {
  Ensemble<LatentState> ens;
  for (int i = 0; i < 4; ++i) {
    ens.particles.push_back({1.7, {3, 4, 5, 6, 7, 8, 9}, false});
    ens.weights.push_back(0.25);
    ens.ancestors.push_back(static_cast<std::size_t>(i));
  }
  const auto s = summarize(ens, onset_kernel());
  EXPECT_DOUBLE_EQ(s.r.lo, 1.7);
  EXPECT_DOUBLE_EQ(s.r.median, 1.7);
  EXPECT_DOUBLE_EQ(s.r.hi, 1.7);
  EXPECT_DOUBLE_EQ(s.j.median, 9.0);
  EXPECT_DOUBLE_EQ(s.p_change, 0.0);
  const std::vector<std::int64_t> j{3, 4, 5, 6, 7, 8, 9};
  EXPECT_DOUBLE_EQ(s.c_pred.median, observe_mean(std::span<const std::int64_t>(j), onset_kernel()));
}

TEST(Summarize, TwoParticleLowerMedianAndChangeProbability) {
  Ensemble<LatentState> ens{{{1.0, std::vector<std::int64_t>(7, 1), true}, {3.0, std::vector<std::int64_t>(7, 2), false}},
                            {0.5, 0.5},
                            {0, 1}};
  const auto s = summarize(ens, onset_kernel());
  EXPECT_DOUBLE_EQ(s.r.median, 1.0);
  EXPECT_DOUBLE_EQ(s.r.lo, 1.0);
  EXPECT_DOUBLE_EQ(s.r.hi, 3.0);
  EXPECT_DOUBLE_EQ(s.p_change, 0.5);
}

TEST(ReconstructObservations, SingleParticle) {
  Ensemble<LatentState> ens{{{1.0, {10, 20, 30, 40, 50, 60, 70}, false}}, {1.0}, {0}};
  const auto c = reconstruct_observations({ens}, onset_kernel());
  const std::vector<std::int64_t> j{10, 20, 30, 40, 50, 60, 70};
  EXPECT_DOUBLE_EQ(c[0].median, observe_mean(std::span<const std::int64_t>(j), onset_kernel()));
}

TEST(Flags, ToString) {
  EXPECT_EQ(flags_to_string(kFlagNone), "");
  EXPECT_EQ(flags_to_string(kFlagWeightCollapse | kFlagImputed), "weight_collapse;imputed");
}

TEST(Run, InsufficientData) {
  EXPECT_THROW(run(CaseSeries::from_counts(std::vector<double>(5, 100.0)), params(), {}), InsufficientData);
  EXPECT_THROW(run(CaseSeries::from_counts(std::vector<double>(40, 3.0)), params(), {}), InsufficientData);
}

TEST(Run, TrimsAtThresholdAndLeavesTrailingNulls) {
  auto sc = scenario_config();
  sc.j_init = 30;
  sc.horizon = 50;
  sc.change_points = {{30, 1.2}};
  sc.noise_multiplier = 0.0;
  const auto s = generate(sc);
  const auto obs = CaseSeries::from_counts(s.c_noisy);
  const auto res = run(obs, params(), {});
  std::size_t first = 0;
  while (!(obs.counts[first] > 10.0)) ++first;
  EXPECT_EQ(res.first_index, first);
  ASSERT_EQ(res.estimates.rows.size(), obs.size() - first);
  EXPECT_EQ(res.estimates.rows.front().date, obs.dates[first]);
  const std::size_t T = res.estimates.rows.size();
  for (std::size_t i = 0; i < T; ++i) {
    const bool trailing = i + 3 >= T;
    EXPECT_EQ(res.estimates.rows[i].r.has_value(), !trailing) << i;
    EXPECT_EQ(res.estimates.rows[i].p_change.has_value(), !trailing) << i;
  }
}

TEST(Run, NoiseFreeReconstructionTracksExpectedReports) {
  auto sc = scenario_config();
  sc.j_init = 50;
  sc.horizon = 80;
  sc.change_points = {{30, 1.3}, {50, 0.9}};
  sc.noise_multiplier = 0.0;
  const auto s = generate(sc);
  const auto res = run(CaseSeries::from_counts(s.c_noisy), params(), {});
  // RMS relative error of the median reconstruction after the warm-up.
  double sq = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 7; i < res.estimates.rows.size(); ++i) {
    const double truth = s.c_bar[res.first_index + i];
    if (truth < 1.0) continue;
    const double rel = (res.estimates.rows[i].c_pred.median - truth) / truth;
    sq += rel * rel;
    ++n;
  }
  ASSERT_GT(n, 30u);
  EXPECT_LT(std::sqrt(sq / static_cast<double>(n)), 0.10);
}

TEST(Run, SmoothedIntervalsNotWiderThanFiltered) {
  auto sc = scenario_config();
  sc.j_init = 50;
  sc.horizon = 80;
  sc.change_points = {{30, 1.3}, {50, 0.9}};
  sc.noise_multiplier = 0.0;
  const auto s = generate(sc);
  const auto res = run(CaseSeries::from_counts(s.c_noisy), params(), {});
  std::size_t narrower = 0, days = 0;
  for (std::size_t i = 0; i < res.estimates.rows.size(); ++i) {
    const auto& sm = res.estimates.rows[i].r;
    const auto& fi = res.filtered.rows[i].r;
    if (!sm) continue;
    ++days;
    if (sm->hi - sm->lo <= fi->hi - fi->lo + 1e-12) ++narrower;
  }
  EXPECT_GE(static_cast<double>(narrower) / static_cast<double>(days), 0.9);
}

TEST(Run, PoissonLikelihoodModeRuns) {
  auto sc = scenario_config();
  sc.j_init = 30;
  sc.horizon = 50;
  sc.change_points = {};
  const auto s = generate(sc);
  auto p = params();
  p.likelihood = LikelihoodMode::Poisson;
  EXPECT_NO_THROW(run(CaseSeries::from_counts(s.c_noisy), p, {}));
}

TEST(Scenario, FrozenWalkIsConstant) {
  auto sc = scenario_config();
  sc.walk_sd = 0.0;
  sc.change_points = {};
  Stream rng(1);
  for (double r : synthesize_rt(sc, rng)) EXPECT_DOUBLE_EQ(r, 3.2);
}

TEST(Scenario, JumpsLandExactly) {
  auto sc = scenario_config();
  Stream rng(2);
  const auto r = synthesize_rt(sc, rng);
  EXPECT_DOUBLE_EQ(r[0], 3.2);
  EXPECT_DOUBLE_EQ(r[23], 1.6);
  EXPECT_DOUBLE_EQ(r[33], 0.5);
  EXPECT_DOUBLE_EQ(r[83], 3.0);
}

TEST(Scenario, WalkIncrementSd) {
  auto sc = scenario_config();
  sc.r0 = 50.0;  // far from zero so truncation never bites
  sc.change_points = {};
  sc.horizon = 2;
  double sum = 0.0, sq = 0.0;
  const int n = 10000;
  Stream rng(3);
  for (int i = 0; i < n; ++i) {
    const auto r = synthesize_rt(sc, rng);
    const double d = r[1] - r[0];
    sum += d;
    sq += d * d;
  }
  const double mean = sum / n;
  const double sd = std::sqrt((sq - n * mean * mean) / (n - 1));
  EXPECT_NEAR(sd, 0.05, 0.002);
}

TEST(Scenario, GenerateConsistency) {
  auto sc = scenario_config();
  sc.noise_multiplier = 0.0;
  const auto s = generate(sc);
  ASSERT_EQ(s.r_true.size(), 120u);
  EXPECT_EQ(s.j_true.size(), 120u);
  EXPECT_EQ(s.c_bar.size(), 120u);
  EXPECT_EQ(s.c_noisy, s.c_bar);
  EXPECT_EQ(s.change_days, (std::vector<int>{23, 33, 83}));
  for (std::size_t t = 0; t < s.j_true.size(); ++t) {
    double c = 0.0;
    for (std::size_t k = 0; k <= t; ++k) c += sc.kernel.pmf.at(static_cast<int>(k)) * s.j_true[t - k];
    EXPECT_NEAR(s.c_bar[t], c, 1e-9);
  }
  const auto again = generate(sc);
  EXPECT_EQ(again.j_true, s.j_true);
}

TEST(Scenario, InvalidChangePoints) {
  auto sc = scenario_config();
  sc.change_points = {{33, 0.5}, {23, 1.6}};
  EXPECT_THROW(generate(sc), InvalidSpec);
  sc.change_points = {{130, 0.5}};
  EXPECT_THROW(generate(sc), InvalidSpec);
}

TEST(Metrics, ErrorMetrics) {
  const std::vector<double> t{1, 1}, e{1.2, 0.8};
  const auto m = error_metrics(t, e);
  EXPECT_NEAR(m.mean_diff, 0.0, 1e-15);
  EXPECT_NEAR(m.sd_diff, 0.2828427124746190, 1e-12);
  EXPECT_NEAR(m.mean_abs_diff, 0.2, 1e-15);
  const auto z = error_metrics(t, t);
  EXPECT_EQ(z.mean_diff, 0.0);
  EXPECT_EQ(z.sd_diff, 0.0);
  EXPECT_THROW(error_metrics(t, std::vector<double>{1.0}), LengthMismatch);
}

TEST(Metrics, Coverage) {
  const std::vector<double> t{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  EXPECT_DOUBLE_EQ(coverage(t, t, t), 1.0);
  std::vector<double> lo(10, 100.0), hi(10, 200.0);
  EXPECT_DOUBLE_EQ(coverage(t, lo, hi), 0.0);
  for (std::size_t i = 0; i < 5; ++i) {
    lo[i] = 0.0;
    hi[i] = 20.0;
  }
  EXPECT_DOUBLE_EQ(coverage(t, lo, hi), 0.5);
  EXPECT_THROW(coverage(t, lo, std::vector<double>{1.0}), LengthMismatch);
}

TEST(Metrics, ChangeDetection) {
  const std::vector<int> days{23, 33, 83};
  std::vector<double> p(120, 0.0);
  for (int d : days) p[static_cast<std::size_t>(d)] = 0.9;
  for (const auto& ev : change_detection_score(p, days)) {
    EXPECT_TRUE(ev.hit);
    EXPECT_EQ(*ev.latency, 0);
  }
  const std::vector<double> flat(120, 0.05);
  for (const auto& ev : change_detection_score(flat, days)) EXPECT_FALSE(ev.hit);

  std::vector<double> late(120, 0.0);
  late[25] = 0.6;
  const auto ev = change_detection_score(late, std::vector<int>{23}, 3);
  ASSERT_TRUE(ev[0].hit);
  EXPECT_EQ(*ev[0].detected_day, 25);
  EXPECT_EQ(*ev[0].latency, 2);
  late[25] = 0.0;
  late[27] = 0.6;
  EXPECT_FALSE(change_detection_score(late, std::vector<int>{23}, 3)[0].hit);
}
