#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "dart/errors.hpp"

namespace dart {

enum class DelayFamily { Gamma, Lognormal, Weibull };

inline std::string_view to_string(DelayFamily family) {
  switch (family) {
    case DelayFamily::Gamma: return "gamma";
    case DelayFamily::Lognormal: return "lognormal";
    case DelayFamily::Weibull: return "weibull";
  }
  return "unknown";
}

/// A continuous delay law. For Gamma and Weibull the parameters are
/// (shape, scale); for Lognormal they are (mean, sd) of the log.
struct ContinuousDelaySpec {
  DelayFamily family = DelayFamily::Gamma;
  double param1 = 1.0;
  double param2 = 1.0;

  void validate() const {
    if (!(param1 > 0.0) || !(param2 > 0.0) || !std::isfinite(param1) || !std::isfinite(param2)) {
      throw InvalidSpec("delay distribution parameters must be positive and finite, got " +
                        std::to_string(param1) + ", " + std::to_string(param2));
    }
  }

  double density(double x) const {
    if (x <= 0.0) return 0.0;
    switch (family) {
      case DelayFamily::Gamma: {
        const double k = param1, theta = param2;
        return std::exp((k - 1.0) * std::log(x) - x / theta - std::lgamma(k) - k * std::log(theta));
      }
      case DelayFamily::Lognormal: {
        const double z = (std::log(x) - param1) / param2;
        return std::exp(-0.5 * z * z) / (x * param2 * std::sqrt(2.0 * std::numbers::pi));
      }
      case DelayFamily::Weibull: {
        const double k = param1, lambda = param2;
        const double r = x / lambda;
        return (k / lambda) * std::pow(r, k - 1.0) * std::exp(-std::pow(r, k));
      }
    }
    return 0.0;
  }
};

/// Probability mass over integer day offsets. probs[k] is the mass at day
/// offset_start + k.
class DelayPMF {
 public:
  DelayPMF() : probs_{1.0} {}

  DelayPMF(int offset_start, std::vector<double> probs)
      : offset_start_(offset_start), probs_(std::move(probs)) {
    if (offset_start_ < 0) throw InvalidSpec("delay offset must be non-negative");
    if (probs_.empty()) throw EmptySupport("delay PMF has no support");
    for (double p : probs_) {
      if (!(p >= 0.0) || !std::isfinite(p)) throw InvalidSpec("delay PMF entries must be finite and >= 0");
    }
  }

  static DelayPMF point_mass(int day) { return DelayPMF(day, {1.0}); }

  int offset_start() const noexcept { return offset_start_; }
  /// Largest day with mass: T_w for a generation time, T_H for a kernel.
  int span() const noexcept { return offset_start_ + static_cast<int>(probs_.size()) - 1; }
  std::size_t size() const noexcept { return probs_.size(); }
  const std::vector<double>& probs() const noexcept { return probs_; }

  /// Mass at an absolute day offset; zero outside the support.
  double at(int day) const noexcept {
    const int k = day - offset_start_;
    if (k < 0 || k >= static_cast<int>(probs_.size())) return 0.0;
    return probs_[static_cast<std::size_t>(k)];
  }

  double total() const noexcept { return std::accumulate(probs_.begin(), probs_.end(), 0.0); }

  double mean() const noexcept {
    double m = 0.0;
    for (std::size_t k = 0; k < probs_.size(); ++k) m += probs_[k] * static_cast<double>(offset_start_ + static_cast<int>(k));
    return m / total();
  }

  DelayPMF normalized() const {
    const double t = total();
    if (!(t > 0.0)) throw EmptySupport("cannot normalise a PMF with zero mass");
    std::vector<double> p = probs_;
    for (double& v : p) v /= t;
    return DelayPMF(offset_start_, std::move(p));
  }

  friend bool operator==(const DelayPMF&, const DelayPMF&) = default;

 private:
  int offset_start_ = 0;
  std::vector<double> probs_;
};

struct DiscretizeOptions {
  /// Days beyond this are never considered.
  int max_span = 60;
  /// First day bin considered; generation times start at 1 so the renewal
  /// sum never references the current day.
  int first_day = 0;
  int steps_per_day = 1000;
};

/// Mass of [day, day + 1) by midpoint quadrature.
inline double day_bin_mass(const ContinuousDelaySpec& spec, int day, int steps) {
  const double h = 1.0 / steps;
  double sum = 0.0;
  for (int s = 0; s < steps; ++s) sum += spec.density(day + (s + 0.5) * h);
  return sum * h;
}

/// Bins a continuous delay into whole days, drops bins whose mass falls below
/// `threshold`, keeps the contiguous run around the mode and optionally
/// renormalises it.
inline DelayPMF discretize(const ContinuousDelaySpec& spec, double threshold, bool normalize = true,
                           const DiscretizeOptions& options = {}) {
  spec.validate();
  if (!(threshold >= 0.0 && threshold < 1.0)) throw InvalidSpec("truncation threshold must lie in [0, 1)");
  if (options.first_day < 0 || options.max_span < options.first_day || options.steps_per_day < 1) {
    throw InvalidSpec("invalid discretisation options");
  }

  std::vector<double> mass;
  mass.reserve(static_cast<std::size_t>(options.max_span - options.first_day + 1));
  for (int day = options.first_day; day <= options.max_span; ++day) {
    mass.push_back(day_bin_mass(spec, day, options.steps_per_day));
  }

  const auto mode = static_cast<std::size_t>(std::distance(mass.begin(), std::max_element(mass.begin(), mass.end())));
  if (!(mass[mode] >= threshold) || !(mass[mode] > 0.0)) {
    throw EmptySupport("no day bin reaches the truncation threshold " + std::to_string(threshold));
  }
  std::size_t lo = mode, hi = mode;
  while (lo > 0 && mass[lo - 1] >= threshold && mass[lo - 1] > 0.0) --lo;
  while (hi + 1 < mass.size() && mass[hi + 1] >= threshold && mass[hi + 1] > 0.0) ++hi;

  DelayPMF pmf(options.first_day + static_cast<int>(lo),
               std::vector<double>(mass.begin() + static_cast<std::ptrdiff_t>(lo),
                                   mass.begin() + static_cast<std::ptrdiff_t>(hi) + 1));
  return normalize ? pmf.normalized() : pmf;
}

/// Discrete convolution: the delay of two independent stages in sequence.
inline DelayPMF convolve(const DelayPMF& a, const DelayPMF& b) {
  const auto& pa = a.probs();
  const auto& pb = b.probs();
  std::vector<double> out(pa.size() + pb.size() - 1, 0.0);
  for (std::size_t i = 0; i < pa.size(); ++i) {
    for (std::size_t j = 0; j < pb.size(); ++j) out[i + j] += pa[i] * pb[j];
  }
  return DelayPMF(a.offset_start() + b.offset_start(), std::move(out));
}

/// The earliest day with mass, i.e. the minimum observation delay d.
inline int min_delay(const DelayPMF& p) noexcept { return p.offset_start(); }

}  // namespace dart
