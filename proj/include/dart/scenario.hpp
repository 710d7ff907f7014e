#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "dart/delay_dist.hpp"
#include "dart/errors.hpp"
#include "dart/observation.hpp"
#include "dart/random.hpp"
#include "dart/renewal.hpp"

namespace dart {

struct ChangePoint {
  int day = 0;
  double r = 0.0;
};

/// Synthetic validation experiment: a piecewise Gaussian random walk for R
/// with forced jumps, the renewal process, the observation kernel and noise.
struct ScenarioConfig {
  double r0 = 3.2;
  double walk_sd = 0.05;
  std::vector<ChangePoint> change_points{{23, 1.6}, {33, 0.5}, {83, 3.0}};
  int horizon = 120;
  double j_init = 1.0;
  double noise_multiplier = 1.0;
  SimulationMode mode = SimulationMode::PoissonDraw;
  DelayPMF generation_time;
  ObservationKernel kernel;
  std::uint64_t seed = 1;

  void validate() const {
    if (horizon < 1) throw InvalidSpec("scenario horizon must be positive");
    if (!(r0 >= 0.0) || !(walk_sd >= 0.0)) throw InvalidSpec("r0 and walk_sd must be non-negative");
    int prev = 0;
    for (const auto& cp : change_points) {
      if (cp.day <= prev || cp.day >= horizon) {
        throw InvalidSpec("change-point days must be strictly increasing, positive and below the horizon");
      }
      if (!(cp.r >= 0.0)) throw InvalidSpec("change-point R must be non-negative");
      prev = cp.day;
    }
  }
};

struct Scenario {
  std::vector<double> r_true;
  std::vector<double> j_true;
  std::vector<double> c_bar;
  std::vector<double> c_noisy;
  std::vector<int> change_days;
};

/// R_0 = r0; R_{t+1} ~ N(R_t, walk_sd^2) truncated at zero, except on change
/// days where R is set to the configured value.
inline std::vector<double> synthesize_rt(const ScenarioConfig& config, Stream& rng) {
  config.validate();
  std::vector<double> r(static_cast<std::size_t>(config.horizon));
  r[0] = config.r0;
  std::size_t next_cp = 0;
  for (int t = 1; t < config.horizon; ++t) {
    if (next_cp < config.change_points.size() && config.change_points[next_cp].day == t) {
      r[static_cast<std::size_t>(t)] = config.change_points[next_cp++].r;
      continue;
    }
    const double prev = r[static_cast<std::size_t>(t - 1)];
    double v = prev;
    if (config.walk_sd > 0.0) {
      std::normal_distribution<double> step(prev, config.walk_sd);
      do {
        v = step(rng);
      } while (v < 0.0);
    }
    r[static_cast<std::size_t>(t)] = v;
  }
  return r;
}

/// R path, infections, expected reports and noisy reports from one seed.
inline Scenario generate(const ScenarioConfig& config) {
  config.validate();
  std::uint64_t sm = config.seed;
  const std::uint64_t r_seed = splitmix64(sm);
  const std::uint64_t j_seed = splitmix64(sm);
  const std::uint64_t noise_seed = splitmix64(sm);

  Scenario s;
  Stream rng(r_seed);
  s.r_true = synthesize_rt(config, rng);
  s.j_true = simulate_infections(s.r_true, config.generation_time, config.j_init, config.mode, j_seed).counts;
  s.c_bar = expected_observations(s.j_true, config.kernel);
  s.c_noisy = add_noise(CaseSeries::from_counts(s.c_bar), config.noise_multiplier, noise_seed).counts;
  for (const auto& cp : config.change_points) s.change_days.push_back(cp.day);
  return s;
}

struct ErrorMetrics {
  double mean_diff = 0.0;      // mean of (estimate - truth)
  double sd_diff = 0.0;        // sample standard deviation (n - 1) of the differences
  double mean_abs_diff = 0.0;  // mean of |estimate - truth|
  std::size_t n = 0;
};

inline ErrorMetrics error_metrics(std::span<const double> truth, std::span<const double> estimate) {
  if (truth.size() != estimate.size()) throw LengthMismatch("truth and estimate lengths differ");
  ErrorMetrics m;
  m.n = truth.size();
  if (m.n == 0) return m;
  for (std::size_t i = 0; i < m.n; ++i) {
    const double diff = estimate[i] - truth[i];
    m.mean_diff += diff;
    m.mean_abs_diff += std::abs(diff);
  }
  m.mean_diff /= static_cast<double>(m.n);
  m.mean_abs_diff /= static_cast<double>(m.n);
  if (m.n > 1) {
    double ss = 0.0;
    for (std::size_t i = 0; i < m.n; ++i) {
      const double dev = estimate[i] - truth[i] - m.mean_diff;
      ss += dev * dev;
    }
    m.sd_diff = std::sqrt(ss / static_cast<double>(m.n - 1));
  }
  return m;
}

/// Fraction of days with lo <= truth <= hi.
inline double coverage(std::span<const double> truth, std::span<const double> lo, std::span<const double> hi) {
  if (truth.size() != lo.size() || truth.size() != hi.size()) throw LengthMismatch("coverage inputs differ in length");
  if (truth.empty()) return 0.0;
  std::size_t inside = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (lo[i] <= truth[i] && truth[i] <= hi[i]) ++inside;
  }
  return static_cast<double>(inside) / static_cast<double>(truth.size());
}

struct ChangeEvent {
  int true_day = 0;
  bool hit = false;
  std::optional<int> detected_day;
  std::optional<int> latency;
};

/// An event counts as detected when p_change has a local maximum above
/// `threshold` within +/- window days of it; the nearest such peak wins.
/// Index i of p_change is day i.
inline std::vector<ChangeEvent> change_detection_score(std::span<const double> p_change, std::span<const int> true_days,
                                                       int window = 3, double threshold = 0.3) {
  const long n = static_cast<long>(p_change.size());
  auto is_peak = [&](long i) {
    const double v = p_change[static_cast<std::size_t>(i)];
    if (!(v > threshold)) return false;
    const bool left = i == 0 || v >= p_change[static_cast<std::size_t>(i - 1)];
    const bool right = i == n - 1 || v >= p_change[static_cast<std::size_t>(i + 1)];
    return left && right;
  };
  std::vector<ChangeEvent> events;
  for (int day : true_days) {
    ChangeEvent ev;
    ev.true_day = day;
    for (int off = 0; off <= window && !ev.hit; ++off) {
      for (int sign : {-1, 1}) {
        if (off == 0 && sign == 1) continue;
        const long i = static_cast<long>(day) + sign * off;
        if (i < 0 || i >= n || !is_peak(i)) continue;
        ev.hit = true;
        ev.detected_day = static_cast<int>(i);
        ev.latency = static_cast<int>(i) - day;
        break;
      }
    }
    events.push_back(ev);
  }
  return events;
}

}  // namespace dart
