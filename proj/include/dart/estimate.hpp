#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dart/errors.hpp"
#include "dart/latent_model.hpp"
#include "dart/observation.hpp"
#include "dart/smc.hpp"

namespace dart {

/// Posterior median and central 95% credible interval.
struct Interval {
  double lo = 0.0;
  double median = 0.0;
  double hi = 0.0;
};

struct DaySummary {
  Interval r;
  Interval j;
  Interval c_pred;
  double p_change = 0.0;
};

enum DayFlag : unsigned {
  kFlagNone = 0,
  kFlagWeightCollapse = 1u << 0,
  kFlagSmoothingDegenerate = 1u << 1,
  kFlagImputed = 1u << 2,
};

inline std::string flags_to_string(unsigned flags) {
  std::string out;
  auto add = [&](const char* name) {
    if (!out.empty()) out += ';';
    out += name;
  };
  if (flags & kFlagWeightCollapse) add("weight_collapse");
  if (flags & kFlagSmoothingDegenerate) add("smoothing_degenerate");
  if (flags & kFlagImputed) add("imputed");
  return out;
}

/// One calendar day of output. R, j and p_change are empty for the trailing
/// d days, whose infections no report has reached yet.
struct EstimateRow {
  Date date{};
  std::optional<Interval> r;
  std::optional<Interval> j;
  std::optional<double> p_change;
  Interval c_pred;
  unsigned flags = kFlagNone;
};

struct EstimateSeries {
  std::vector<EstimateRow> rows;
};

inline Interval weighted_interval(std::span<const double> values, std::span<const double> weights) {
  return {weighted_quantile(values, weights, 0.025), weighted_quantile(values, weights, 0.5),
          weighted_quantile(values, weights, 0.975)};
}

inline DaySummary summarize(const Ensemble<LatentState>& ens, const ObservationKernel& kernel) {
  const std::size_t n = ens.size();
  std::vector<double> r(n), j(n), c(n);
  double p_change = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = ens.particles[i];
    r[i] = p.r;
    j[i] = p.j.empty() ? 0.0 : static_cast<double>(p.j.back());
    c[i] = observe_mean(std::span<const std::int64_t>(p.j), kernel);
    if (p.m) p_change += ens.weights[i];
  }
  DaySummary s;
  s.r = weighted_interval(r, ens.weights);
  s.j = weighted_interval(j, ens.weights);
  s.c_pred = weighted_interval(c, ens.weights);
  s.p_change = std::clamp(p_change, 0.0, 1.0);
  return s;
}

/// Weighted 2.5/50/97.5% quantiles of the expected report for each day.
inline std::vector<Interval> reconstruct_observations(const std::vector<Ensemble<LatentState>>& ensembles,
                                                      const ObservationKernel& kernel) {
  std::vector<Interval> out;
  out.reserve(ensembles.size());
  for (const auto& ens : ensembles) {
    std::vector<double> c(ens.size());
    for (std::size_t i = 0; i < ens.size(); ++i) {
      c[i] = observe_mean(std::span<const std::int64_t>(ens.particles[i].j), kernel);
    }
    out.push_back(weighted_interval(c, ens.weights));
  }
  return out;
}

struct EngineConfig {
  std::size_t n_particles = 200;
  /// Estimation starts on the first day whose count exceeds this.
  double start_threshold = 10.0;
  int variance_window = 7;
  VarianceFloor variance_floor;
  FilterOptions filter;
  Smoother smoother = Smoother::FFBSm;
  std::uint64_t seed = 1;
};

struct RunResult {
  /// Estimates under the configured smoother.
  EstimateSeries estimates;
  /// Forward-filter estimates from the same particles.
  EstimateSeries filtered;
  /// Index into the input of the first assimilated day.
  std::size_t first_index = 0;
  int delay = 0;
  std::vector<double> ess;
  std::vector<bool> resampled;
  std::vector<bool> collapsed;
  std::vector<bool> degenerate;
  VarianceSeries variance;
};

namespace detail {

inline EstimateSeries label_estimates(const std::vector<Ensemble<LatentState>>& ensembles, const CaseSeries& window,
                                      const ObservationKernel& kernel, const std::vector<unsigned>& day_flags) {
  const std::size_t T = ensembles.size();
  const auto d = static_cast<std::size_t>(kernel.min_delay());
  std::vector<DaySummary> summaries;
  summaries.reserve(T);
  for (const auto& e : ensembles) summaries.push_back(summarize(e, kernel));

  EstimateSeries out;
  out.rows.resize(T);
  for (std::size_t s = 0; s < T; ++s) {
    auto& row = out.rows[s];
    row.date = window.dates[s];
    row.c_pred = summaries[s].c_pred;
    row.flags = day_flags[s];
    if (s + d < T) {
      // The state assimilated on report day s + d describes infections on day s.
      const auto& sm = summaries[s + d];
      row.r = sm.r;
      row.j = sm.j;
      row.p_change = sm.p_change;
      row.flags |= day_flags[s + d] & (kFlagWeightCollapse | kFlagSmoothingDegenerate);
    }
  }
  return out;
}

}  // namespace detail

/// Full estimation: trim to the start threshold, estimate the reporting
/// variance, filter forward, smooth backward and summarise each calendar day.
inline RunResult run(const CaseSeries& obs, const ModelParams& params, const EngineConfig& config) {
  params.validate();
  if (obs.dates.size() != obs.counts.size()) throw LengthMismatch("case series dates and counts differ in length");

  std::size_t first = 0;
  while (first < obs.size() && !(obs.counts[first] > config.start_threshold)) ++first;
  if (first == obs.size()) {
    throw InsufficientData("no day exceeds the start threshold of " + std::to_string(config.start_threshold));
  }

  CaseSeries window;
  window.dates.assign(obs.dates.begin() + static_cast<std::ptrdiff_t>(first), obs.dates.end());
  window.counts.assign(obs.counts.begin() + static_cast<std::ptrdiff_t>(first), obs.counts.end());
  if (obs.imputed.size() == obs.size()) {
    window.imputed.assign(obs.imputed.begin() + static_cast<std::ptrdiff_t>(first), obs.imputed.end());
  } else {
    window.imputed.assign(window.size(), false);
  }

  const int d = params.kernel.min_delay();
  const auto needed = static_cast<std::size_t>(params.history_length() + d + 1);
  if (window.size() < needed) {
    throw InsufficientData("need at least " + std::to_string(needed) + " days after the start threshold, got " +
                           std::to_string(window.size()));
  }

  const RenewalModel model(params);
  const StreamFamily streams(config.seed);
  RunResult result;
  result.first_index = first;
  result.delay = d;
  result.variance = empirical_variance(window, config.variance_window, config.variance_floor);

  Stream init_rng = streams.at(~std::uint64_t{0}, 0);
  auto ens = init_ensemble(params, std::span<const double>(obs.counts), first, config.n_particles, init_rng);

  const std::size_t T = window.size();
  std::vector<Ensemble<LatentState>> filtered;
  filtered.reserve(T);
  std::vector<unsigned> flags(T, kFlagNone);
  result.ess.resize(T);
  result.resampled.resize(T);
  result.collapsed.resize(T);
  for (std::size_t t = 0; t < T; ++t) {
    StepReport rep;
    ens = filter_step(model, ens, DailyObservation{window.counts[t], result.variance.values[t]}, streams, t,
                      config.filter, &rep);
    result.ess[t] = rep.ess_after;
    result.resampled[t] = rep.resampled;
    result.collapsed[t] = rep.collapsed;
    if (rep.collapsed) flags[t] |= kFlagWeightCollapse;
    if (window.imputed[t]) flags[t] |= kFlagImputed;
    filtered.push_back(ens);
  }

  SmoothOptions smooth_opts;
  smooth_opts.method = config.smoother;
  smooth_opts.workers = config.filter.workers;
  smooth_opts.seed = config.seed ^ 0x5DEECE66DULL;
  auto smoothed = smooth(model, filtered, smooth_opts);
  result.degenerate = smoothed.degenerate;

  std::vector<unsigned> smooth_flags = flags;
  for (std::size_t t = 0; t < T; ++t) {
    if (smoothed.degenerate[t]) smooth_flags[t] |= kFlagSmoothingDegenerate;
  }
  result.filtered = detail::label_estimates(filtered, window, params.kernel, flags);
  result.estimates = detail::label_estimates(smoothed.ensembles, window, params.kernel, smooth_flags);
  return result;
}

}  // namespace dart
