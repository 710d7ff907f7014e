#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dart/delay_dist.hpp"
#include "dart/errors.hpp"
#include "dart/random.hpp"

namespace dart {

using Date = std::chrono::sys_days;

enum class ObservationKind { Onset, Confirmed, Death };

inline std::string_view to_string(ObservationKind kind) {
  switch (kind) {
    case ObservationKind::Onset: return "onset";
    case ObservationKind::Confirmed: return "confirmed";
    case ObservationKind::Death: return "death";
  }
  return "unknown";
}

/// Infection-to-report kernel together with the fraction of infections that
/// end up in the series (the mortality rate for deaths, 1 otherwise).
struct ObservationKernel {
  ObservationKind kind = ObservationKind::Onset;
  DelayPMF pmf;
  double mortality_scale = 1.0;

  int min_delay() const noexcept { return pmf.offset_start(); }
  /// Number of most recent infections one report depends on: T_H - d + 1.
  int window() const noexcept { return static_cast<int>(pmf.size()); }
};

/// Daily counts on contiguous calendar days. `imputed[i]` marks days that were
/// absent from the input and filled with zero.
struct CaseSeries {
  std::vector<Date> dates;
  std::vector<double> counts;
  std::vector<bool> imputed;

  std::size_t size() const noexcept { return counts.size(); }

  static CaseSeries from_counts(std::vector<double> counts, Date start = Date{}) {
    CaseSeries s;
    s.dates.reserve(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) s.dates.push_back(start + std::chrono::days(i));
    s.imputed.assign(counts.size(), false);
    s.counts = std::move(counts);
    return s;
  }
};

struct VarianceSeries {
  std::vector<double> values;
};

inline ObservationKernel build_kernel(ObservationKind kind, const std::optional<DelayPMF>& incubation,
                                      const std::optional<DelayPMF>& onset_to_report = std::nullopt,
                                      const std::optional<DelayPMF>& infection_to_death = std::nullopt,
                                      std::optional<double> mortality = std::nullopt) {
  switch (kind) {
    case ObservationKind::Onset:
      if (!incubation) throw MissingComponent("onset kernel needs an incubation distribution");
      return {kind, *incubation, 1.0};
    case ObservationKind::Confirmed:
      if (!incubation) throw MissingComponent("confirmed kernel needs an incubation distribution");
      if (!onset_to_report) throw MissingComponent("confirmed kernel needs an onset-to-report distribution");
      return {kind, convolve(*incubation, *onset_to_report), 1.0};
    case ObservationKind::Death:
      if (!infection_to_death) throw MissingComponent("death kernel needs an infection-to-death distribution");
      if (!mortality) throw MissingComponent("death kernel needs a mortality rate");
      if (!(*mortality > 0.0 && *mortality <= 1.0)) throw InvalidSpec("mortality rate must lie in (0, 1]");
      return {kind, *infection_to_death, *mortality};
  }
  throw InvalidSpec("unknown observation kind");
}

/// Expected report count from the infections that can reach it. `j_window`
/// ends at j_{t-d}; the entry k days earlier is j_{t-d-k}.
template <typename T>
double observe_mean(std::span<const T> j_window, const ObservationKernel& kernel) {
  const auto& probs = kernel.pmf.probs();
  if (j_window.size() < probs.size()) {
    throw WindowTooShort("observation needs " + std::to_string(probs.size()) + " infection days, got " +
                         std::to_string(j_window.size()));
  }
  const std::size_t last = j_window.size() - 1;
  double sum = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) sum += probs[k] * static_cast<double>(j_window[last - k]);
  return kernel.mortality_scale * sum;
}

/// Expected reports for every day of an infection series, treating days
/// before the series as zero.
inline std::vector<double> expected_observations(std::span<const double> j, const ObservationKernel& kernel) {
  std::vector<double> out(j.size(), 0.0);
  const int d = kernel.min_delay();
  for (std::size_t t = 0; t < j.size(); ++t) {
    double sum = 0.0;
    for (int k = d; k <= kernel.pmf.span(); ++k) {
      const long idx = static_cast<long>(t) - k;
      if (idx < 0) break;
      sum += kernel.pmf.at(k) * j[static_cast<std::size_t>(idx)];
    }
    out[t] = kernel.mortality_scale * sum;
  }
  return out;
}

/// Multiplicative Gaussian reporting noise: sd = N * count, then rounded and
/// clipped at zero. N = 0 leaves the series untouched.
inline CaseSeries add_noise(const CaseSeries& series, double noise_multiplier, std::uint64_t seed) {
  if (!(noise_multiplier >= 0.0)) throw InvalidSpec("noise multiplier must be non-negative");
  if (noise_multiplier == 0.0) return series;
  Stream rng(seed);
  CaseSeries out = series;
  for (double& c : out.counts) {
    std::normal_distribution<double> eps(0.0, noise_multiplier * c);
    const double noisy = c > 0.0 ? c + eps(rng) : c;
    c = std::max(0.0, std::round(noisy));
  }
  return out;
}

/// Centred moving average; the window shrinks symmetrically near the ends.
inline std::vector<double> centered_moving_average(std::span<const double> x, int window) {
  if (window < 1 || window % 2 == 0) throw InvalidSpec("moving-average window must be odd and >= 1");
  const long n = static_cast<long>(x.size());
  const long half = window / 2;
  std::vector<double> out(x.size());
  for (long i = 0; i < n; ++i) {
    const long h = std::min({half, i, n - 1 - i});
    double sum = 0.0;
    for (long k = i - h; k <= i + h; ++k) sum += x[static_cast<std::size_t>(k)];
    out[static_cast<std::size_t>(i)] = sum / static_cast<double>(2 * h + 1);
  }
  return out;
}

struct VarianceFloor {
  double absolute = 1.0;
  double relative = 0.05;
};

/// Reporting-error variance from the data: moving average, residual, then a
/// moving average of the squared residual, floored at
/// max(absolute, (relative * moving average)^2).
inline VarianceSeries empirical_variance(const CaseSeries& series, int window = 7, VarianceFloor floor = {}) {
  const std::span<const double> c(series.counts);
  const auto mean = centered_moving_average(c, window);
  std::vector<double> sq(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double e = c[i] - mean[i];
    sq[i] = e * e;
  }
  auto var = centered_moving_average(sq, window);
  for (std::size_t i = 0; i < var.size(); ++i) {
    const double rel = floor.relative * mean[i];
    var[i] = std::max({var[i], floor.absolute, rel * rel});
  }
  return {std::move(var)};
}

enum class LikelihoodMode { Gaussian, Poisson };

inline double log_likelihood(double observed, double predicted, double variance,
                             LikelihoodMode mode = LikelihoodMode::Gaussian) {
  if (mode == LikelihoodMode::Poisson) {
    const double k = std::max(0.0, std::round(observed));
    if (!(predicted > 0.0)) return k == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
    return k * std::log(predicted) - predicted - std::lgamma(k + 1.0);
  }
  if (!(variance > 0.0)) throw NonpositiveVariance("observation variance must be positive");
  const double z = observed - predicted;
  return -0.5 * (z * z / variance + std::log(2.0 * std::numbers::pi * variance));
}

inline double likelihood(double observed, double predicted, double variance,
                         LikelihoodMode mode = LikelihoodMode::Gaussian) {
  return std::exp(log_likelihood(observed, predicted, variance, mode));
}

}  // namespace dart
