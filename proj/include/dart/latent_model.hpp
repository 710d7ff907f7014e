#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dart/delay_dist.hpp"
#include "dart/errors.hpp"
#include "dart/observation.hpp"
#include "dart/random.hpp"
#include "dart/renewal.hpp"
#include "dart/smc.hpp"

namespace dart {

/// One particle: reproduction number, the last T_phi daily infections (most
/// recent last) and the abrupt-change indicator, all at infection time t - d.
struct LatentState {
  double r = 0.0;
  std::vector<std::int64_t> j;
  bool m = false;

  friend bool operator==(const LatentState&, const LatentState&) = default;
};

/// Length of the infection window a state must carry so that both the
/// renewal sum and the observation kernel can be evaluated from it.
inline int required_history(const DelayPMF& w, const ObservationKernel& kernel) {
  return std::max(w.span(), kernel.window());
}

struct ModelParams {
  double sigma_r = 0.1;
  double delta = 0.5;
  double alpha = 0.95;
  DelayPMF w;
  ObservationKernel kernel;
  /// 0 selects required_history(w, kernel).
  int t_phi = 0;
  double r_prior_lo = 1.0;
  double r_prior_hi = 5.0;
  LikelihoodMode likelihood = LikelihoodMode::Gaussian;

  int history_length() const { return t_phi > 0 ? t_phi : required_history(w, kernel); }

  void validate() const {
    require_generation_kernel(w);
    if (!(sigma_r > 0.0)) throw InvalidSpec("sigma_R must be positive");
    if (!(delta >= 0.0)) throw InvalidSpec("delta must be non-negative");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidSpec("alpha must lie in (0, 1]");
    if (!(r_prior_lo >= 0.0 && r_prior_hi > r_prior_lo)) throw InvalidSpec("R prior must be an interval [lo, hi] with 0 <= lo < hi");
    if (t_phi != 0 && t_phi < required_history(w, kernel)) {
      throw InvalidSpec("T_phi must be at least " + std::to_string(required_history(w, kernel)));
    }
  }
};

/// M_t is drawn independently of M_{t-1}: 1 with probability 1 - alpha.
inline bool sample_m(const ModelParams& params, Stream& rng) { return rng.uniform() >= params.alpha; }

/// Mode I (m = false): Gaussian walk truncated at zero. Mode II (m = true):
/// uniform reset on [0, prev_r + delta].
inline double sample_r(double prev_r, bool m, const ModelParams& params, Stream& rng) {
  if (m) return rng.uniform() * (prev_r + params.delta);
  std::normal_distribution<double> step(prev_r, params.sigma_r);
  for (;;) {
    const double r = step(rng);
    if (r >= 0.0) return r;
  }
}

/// Shifts the infection window one day and appends a Poisson renewal draw.
inline std::vector<std::int64_t> advance_j(std::span<const std::int64_t> j_prev, double r_new, const DelayPMF& w,
                                           Stream& rng) {
  if (j_prev.empty()) throw InvalidSpec("infection window must be non-empty");
  const double mean = renewal_mean(r_new, j_prev, w);
  std::vector<std::int64_t> out(j_prev.begin() + 1, j_prev.end());
  out.push_back(draw_poisson(mean, rng));
  return out;
}

inline double log_poisson_pmf(double k, double mean) {
  if (!(mean > 0.0)) return k == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
  return k * std::log(mean) - mean - std::lgamma(k + 1.0);
}

inline double log_normal_cdf(double z) { return std::log(0.5 * std::erfc(-z / std::numbers::sqrt2)); }

/// log p(R_next | R_prev, M_next) for the two switching modes.
inline double log_r_transition(double next_r, double prev_r, bool m, const ModelParams& params) {
  if (next_r < 0.0) return -std::numeric_limits<double>::infinity();
  if (m) {
    const double upper = prev_r + params.delta;
    return next_r <= upper && upper > 0.0 ? -std::log(upper) : -std::numeric_limits<double>::infinity();
  }
  const double z = (next_r - prev_r) / params.sigma_r;
  return -0.5 * z * z - std::log(params.sigma_r * std::sqrt(2.0 * std::numbers::pi)) -
         log_normal_cdf(prev_r / params.sigma_r);
}

/// Transition density p(next | prev). The window-shift factor is not
/// enforced: the appended count is scored against prev's window, which lets
/// the smoother weigh any pair of particles.
inline double log_transition_density(const LatentState& next, const LatentState& prev, const ModelParams& params) {
  const double log_m = next.m ? std::log1p(-params.alpha) : std::log(params.alpha);
  const double log_r = log_r_transition(next.r, prev.r, next.m, params);
  if (log_r == -std::numeric_limits<double>::infinity()) return log_r;
  if (next.j.empty()) return log_m + log_r;
  const double mean = next.r * infection_pressure(std::span<const std::int64_t>(prev.j), params.w);
  return log_m + log_r + log_poisson_pmf(static_cast<double>(next.j.back()), mean);
}

inline double transition_density(const LatentState& next, const LatentState& prev, const ModelParams& params) {
  return std::exp(log_transition_density(next, prev, params));
}

struct DailyObservation {
  double count = 0.0;
  double variance = 1.0;
};

/// The switching renewal state-space model in the form the SMC engine
/// consumes.
class RenewalModel {
 public:
  using state_type = LatentState;
  using observation_type = DailyObservation;

  explicit RenewalModel(ModelParams params) : params_(std::move(params)) { params_.validate(); }

  const ModelParams& params() const noexcept { return params_; }

  LatentState propagate(const LatentState& prev, Stream& rng) const {
    LatentState next;
    next.m = sample_m(params_, rng);
    next.r = sample_r(prev.r, next.m, params_, rng);
    next.j = advance_j(prev.j, next.r, params_.w, rng);
    return next;
  }

  double predicted_observation(const LatentState& s) const {
    return observe_mean(std::span<const std::int64_t>(s.j), params_.kernel);
  }

  double log_likelihood(const LatentState& s, const DailyObservation& obs) const {
    return dart::log_likelihood(obs.count, predicted_observation(s), obs.variance, params_.likelihood);
  }

  double log_transition_density(const LatentState& next, const LatentState& prev) const {
    return dart::log_transition_density(next, prev, params_);
  }

 private:
  ModelParams params_;
};

static_assert(StateSpaceModel<RenewalModel>);

/// Prior ensemble for the day before the first assimilated report
/// `early_obs[first]`. R is uniform on the prior interval and M = 0. Each
/// window entry j_s is a Poisson draw around the report observed
/// round(mean kernel delay) days later, rescaled by the kernel's reporting
/// fraction. Reports before `first` (below the start threshold) are used
/// when the lag reaches back to them; indices outside the series clamp to
/// its ends.
inline Ensemble<LatentState> init_ensemble(const ModelParams& params, std::span<const double> early_obs,
                                           std::size_t first, std::size_t n_particles, Stream& rng) {
  params.validate();
  const int t_phi = params.history_length();
  const int d = params.kernel.min_delay();
  if (n_particles == 0) throw InvalidSpec("need at least one particle");
  if (first > early_obs.size() || static_cast<long>(early_obs.size() - first) < t_phi + d) {
    throw InsufficientData("initialisation needs " + std::to_string(t_phi + d) + " days of observations, got " +
                           std::to_string(first > early_obs.size() ? 0 : early_obs.size() - first));
  }

  const int lag = static_cast<int>(std::lround(params.kernel.pmf.mean()));
  const long n_obs = static_cast<long>(early_obs.size());
  const long base = static_cast<long>(first);
  // Window entry e (0 = oldest) sits at infection day s = -d - t_phi + e,
  // relative to the first assimilated report.
  std::vector<double> seed_mean(static_cast<std::size_t>(t_phi));
  for (int e = 0; e < t_phi; ++e) {
    const long idx = std::clamp<long>(base - d - t_phi + e + lag, 0, n_obs - 1);
    seed_mean[static_cast<std::size_t>(e)] =
        std::max(1.0, early_obs[static_cast<std::size_t>(idx)] / params.kernel.mortality_scale);
  }

  Ensemble<LatentState> ens;
  ens.particles.resize(n_particles);
  ens.weights.assign(n_particles, 1.0 / static_cast<double>(n_particles));
  ens.ancestors.resize(n_particles);
  std::uniform_real_distribution<double> prior(params.r_prior_lo, params.r_prior_hi);
  for (std::size_t i = 0; i < n_particles; ++i) {
    auto& p = ens.particles[i];
    p.r = prior(rng);
    p.m = false;
    p.j.resize(static_cast<std::size_t>(t_phi));
    for (int e = 0; e < t_phi; ++e) p.j[static_cast<std::size_t>(e)] = draw_poisson(seed_mean[static_cast<std::size_t>(e)], rng);
    ens.ancestors[i] = i;
  }
  return ens;
}

inline Ensemble<LatentState> init_ensemble(const ModelParams& params, std::span<const double> early_obs,
                                           std::size_t n_particles, Stream& rng) {
  return init_ensemble(params, early_obs, 0, n_particles, rng);
}

inline Ensemble<LatentState> init_ensemble(const ModelParams& params, const CaseSeries& early_obs,
                                           std::size_t n_particles, Stream& rng) {
  return init_ensemble(params, std::span<const double>(early_obs.counts), 0, n_particles, rng);
}

}  // namespace dart
