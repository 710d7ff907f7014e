#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dart/delay_dist.hpp"
#include "dart/errors.hpp"
#include "dart/random.hpp"

namespace dart {

/// Daily incident infections, most recent last.
struct InfectionHistory {
  std::vector<double> counts;
  int day0 = 0;
};

enum class SimulationMode { PoissonDraw, DeterministicMean };

inline void require_generation_kernel(const DelayPMF& w) {
  if (w.offset_start() < 1) {
    throw InvalidSpec("generation-time PMF must start at day 1 or later");
  }
}

/// Generation-weighted force of infection: sum over k of w_k * j_{t-k}, where
/// `history` ends at j_{t-1}. Days before the start of `history` count as zero
/// when `zero_pad` is set; otherwise a short history is an error.
template <typename T>
double infection_pressure(std::span<const T> history, const DelayPMF& w, bool zero_pad = false) {
  const auto n = static_cast<long>(history.size());
  if (!zero_pad && n < w.span()) {
    throw InsufficientHistory("renewal needs " + std::to_string(w.span()) + " days of history, got " +
                              std::to_string(n));
  }
  double sum = 0.0;
  for (int k = w.offset_start(); k <= w.span(); ++k) {
    const long idx = n - k;
    if (idx < 0) break;
    sum += w.at(k) * static_cast<double>(history[static_cast<std::size_t>(idx)]);
  }
  return sum;
}

/// Expected incidence R * sum_k w_k j_{t-k}.
template <typename T>
double renewal_mean(double r, std::span<const T> history, const DelayPMF& w) {
  require_generation_kernel(w);
  if (r < 0.0) throw InvalidSpec("reproduction number must be non-negative");
  return r * infection_pressure(history, w);
}

inline double renewal_mean(double r, const InfectionHistory& history, const DelayPMF& w) {
  return renewal_mean(r, std::span<const double>(history.counts), w);
}

inline std::int64_t draw_poisson(double mean, Stream& rng) {
  if (!(mean > 0.0)) return 0;
  std::poisson_distribution<std::int64_t> dist(mean);
  return dist(rng);
}

/// Runs the renewal recursion forward from a single seed j_0 = j_init.
/// R_path[t] drives day t; R_path[0] is unused because day 0 is the seed.
inline InfectionHistory simulate_infections(std::span<const double> r_path, const DelayPMF& w, double j_init,
                                            SimulationMode mode, std::uint64_t seed) {
  require_generation_kernel(w);
  if (r_path.empty()) throw InvalidSpec("R path must be non-empty");
  if (!(j_init >= 0.0)) throw InvalidSpec("initial infections must be non-negative");

  Stream rng(seed);
  InfectionHistory out;
  out.counts.reserve(r_path.size());
  out.counts.push_back(j_init);
  for (std::size_t t = 1; t < r_path.size(); ++t) {
    if (r_path[t] < 0.0) throw InvalidSpec("R path entries must be non-negative");
    const double mean = r_path[t] * infection_pressure(std::span<const double>(out.counts), w, true);
    out.counts.push_back(mode == SimulationMode::PoissonDraw ? static_cast<double>(draw_poisson(mean, rng)) : mean);
  }
  return out;
}

/// Noise-free inverse of the recursion. Entries are empty on days without a
/// full generation window or with zero infection pressure.
inline std::vector<std::optional<double>> invert_rt(const InfectionHistory& j, const DelayPMF& w) {
  require_generation_kernel(w);
  std::vector<std::optional<double>> r(j.counts.size());
  const std::span<const double> all(j.counts);
  for (std::size_t t = static_cast<std::size_t>(w.span()); t < j.counts.size(); ++t) {
    const double denom = infection_pressure(all.first(t), w);
    if (denom > 0.0) r[t] = j.counts[t] / denom;
  }
  return r;
}

}  // namespace dart
