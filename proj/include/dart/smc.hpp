#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <thread>
#include <vector>

#include "dart/errors.hpp"
#include "dart/random.hpp"

namespace dart {

/// Weighted particle approximation of one filtering or smoothing marginal.
/// ancestors[i] indexes the previous step's ensemble.
template <typename State>
struct Ensemble {
  std::vector<State> particles;
  std::vector<double> weights;
  std::vector<std::size_t> ancestors;

  std::size_t size() const noexcept { return particles.size(); }
};

/// What the filter and smoother need from a state-space model.
template <typename M>
concept StateSpaceModel = requires(const M& model, const typename M::state_type& state,
                                   const typename M::observation_type& obs, Stream& rng) {
  { model.propagate(state, rng) } -> std::convertible_to<typename M::state_type>;
  { model.log_likelihood(state, obs) } -> std::convertible_to<double>;
  { model.log_transition_density(state, state) } -> std::convertible_to<double>;
};

enum class Resampling { Systematic, None };
enum class Smoother { FFBSm, BackwardSimulation, None };

struct FilterOptions {
  Resampling resampling = Resampling::Systematic;
  /// Resample when ESS drops below this fraction of N.
  double ess_threshold_fraction = 0.5;
  unsigned workers = 1;
};

struct StepReport {
  double ess_before = 0.0;  // ESS of the incoming weights
  double ess_after = 0.0;   // ESS after reweighting by the new observation
  bool resampled = false;
  bool collapsed = false;
};

/// Runs fn(i) for i in [0, n). Each index is handled by exactly one worker,
/// so results never depend on the worker count.
template <typename Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
  if (workers <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t w = std::min<std::size_t>(workers, n);
  const std::size_t chunk = (n + w - 1) / w;
  std::vector<std::jthread> pool;
  pool.reserve(w);
  for (std::size_t k = 0; k < w; ++k) {
    const std::size_t lo = k * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
}

inline double ess(std::span<const double> weights) noexcept {
  double sq = 0.0;
  for (double w : weights) sq += w * w;
  return sq > 0.0 ? 1.0 / sq : 0.0;
}

inline double log_sum_exp(std::span<const double> x) noexcept {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : x) mx = std::max(mx, v);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double v : x) s += std::exp(v - mx);
  return mx + std::log(s);
}

/// Normalises log-weights in place into `out`. Returns false when every
/// entry is -inf or NaN.
inline bool normalize_log_weights(std::span<const double> log_w, std::span<double> out) noexcept {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : log_w) {
    if (v > mx) mx = v;  // NaN never compares greater
  }
  if (!std::isfinite(mx)) return false;
  double s = 0.0;
  for (std::size_t i = 0; i < log_w.size(); ++i) {
    out[i] = std::isnan(log_w[i]) ? 0.0 : std::exp(log_w[i] - mx);
    s += out[i];
  }
  for (double& v : out) v /= s;
  return true;
}

/// Systematic resampling with a single offset u in [0, 1): slot k takes the
/// particle whose cumulative-weight interval contains (u + k) / n.
inline std::vector<std::size_t> systematic_indices(std::span<const double> weights, std::size_t n, double u) {
  std::vector<std::size_t> idx(n);
  if (weights.empty()) throw InvalidSpec("cannot resample an empty ensemble");
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::size_t i = 0;
  double cum = weights[0] / total;
  for (std::size_t k = 0; k < n; ++k) {
    const double pos = (u + static_cast<double>(k)) / static_cast<double>(n);
    while (pos >= cum && i + 1 < weights.size()) cum += weights[++i] / total;
    idx[k] = i;
  }
  return idx;
}

/// Systematic resampling to uniform weights; ancestors record the source.
template <typename State>
Ensemble<State> resample(const Ensemble<State>& ens, Stream& rng) {
  const std::size_t n = ens.size();
  Ensemble<State> out;
  out.ancestors = systematic_indices(ens.weights, n, rng.uniform());
  out.particles.reserve(n);
  for (std::size_t a : out.ancestors) out.particles.push_back(ens.particles[a]);
  out.weights.assign(n, 1.0 / static_cast<double>(n));
  return out;
}

/// Smallest value whose cumulative weight reaches `level`.
inline double weighted_quantile(std::span<const double> values, std::span<const double> weights, double level) {
  if (values.empty()) throw InvalidSpec("quantile of an empty sample");
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  double cum = 0.0;
  for (std::size_t k : order) {
    cum += weights[k] / total;
    if (cum >= level - 1e-12) return values[k];
  }
  return values[order.back()];
}

/// One bootstrap particle-filter step: optionally resample the incoming
/// ensemble, propagate every particle through the transition prior and
/// reweight by the likelihood of `obs`. Particle i on `day` draws from its own
/// stream streams.at(day, i); resampling uses streams.at(day, N).
template <StateSpaceModel Model>
Ensemble<typename Model::state_type> filter_step(const Model& model, const Ensemble<typename Model::state_type>& prev,
                                                 const typename Model::observation_type& obs,
                                                 const StreamFamily& streams, std::uint64_t day,
                                                 const FilterOptions& options = {}, StepReport* report = nullptr) {
  using State = typename Model::state_type;
  const std::size_t n = prev.size();
  if (n == 0) throw InvalidSpec("cannot filter an empty ensemble");

  StepReport rep;
  rep.ess_before = ess(prev.weights);

  std::vector<std::size_t> source(n);
  std::vector<double> base_weight = prev.weights;
  if (options.resampling == Resampling::Systematic &&
      rep.ess_before < options.ess_threshold_fraction * static_cast<double>(n)) {
    Stream rng = streams.at(day, n);
    source = systematic_indices(prev.weights, n, rng.uniform());
    base_weight.assign(n, 1.0 / static_cast<double>(n));
    rep.resampled = true;
  } else {
    std::iota(source.begin(), source.end(), std::size_t{0});
  }

  Ensemble<State> next;
  next.particles.resize(n);
  next.ancestors = source;
  std::vector<double> log_w(n);
  parallel_for(n, options.workers, [&](std::size_t i) {
    Stream rng = streams.at(day, i);
    next.particles[i] = model.propagate(prev.particles[source[i]], rng);
    log_w[i] = std::log(base_weight[i]) + model.log_likelihood(next.particles[i], obs);
  });

  next.weights.resize(n);
  if (!normalize_log_weights(log_w, next.weights)) {
    next.weights.assign(n, 1.0 / static_cast<double>(n));
    rep.collapsed = true;
  }
  rep.ess_after = ess(next.weights);
  if (report) *report = rep;
  return next;
}

struct SmoothOptions {
  Smoother method = Smoother::FFBSm;
  unsigned workers = 1;
  /// Root seed for backward simulation.
  std::uint64_t seed = 0;
  /// Number of backward trajectories; 0 means one per particle.
  std::size_t trajectories = 0;
};

template <typename State>
struct SmoothResult {
  std::vector<Ensemble<State>> ensembles;
  /// Days where the backward normaliser underflowed and filtered weights were kept.
  std::vector<bool> degenerate;
};

namespace detail {

// Forward-filtering backward-smoothing reweighting:
// W~_t^i = W_t^i * sum_j W~_{t+1}^j f(x_{t+1}^j | x_t^i) / sum_k W_t^k f(x_{t+1}^j | x_t^k)
template <StateSpaceModel Model>
void ffbsm_step(const Model& model, const Ensemble<typename Model::state_type>& at_t,
                const Ensemble<typename Model::state_type>& next_smoothed, std::vector<double>& out_weights,
                unsigned workers, bool& degenerate) {
  const std::size_t n = at_t.size();
  const std::size_t m = next_smoothed.size();
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();

  std::vector<double> log_w(n);
  for (std::size_t i = 0; i < n; ++i) log_w[i] = at_t.weights[i] > 0.0 ? std::log(at_t.weights[i]) : kNegInf;

  // b_j = log W~_{t+1}^j - log sum_k W_t^k f(x^j | x^k)
  std::vector<double> b(m, kNegInf);
  parallel_for(m, workers, [&](std::size_t j) {
    if (!(next_smoothed.weights[j] > 0.0)) return;
    std::vector<double> terms(n);
    for (std::size_t k = 0; k < n; ++k) {
      terms[k] = log_w[k] == kNegInf
                     ? kNegInf
                     : log_w[k] + model.log_transition_density(next_smoothed.particles[j], at_t.particles[k]);
    }
    const double denom = log_sum_exp(terms);
    if (std::isfinite(denom)) b[j] = std::log(next_smoothed.weights[j]) - denom;
  });

  std::vector<double> log_out(n, kNegInf);
  parallel_for(n, workers, [&](std::size_t i) {
    if (log_w[i] == kNegInf) return;
    std::vector<double> terms(m);
    for (std::size_t j = 0; j < m; ++j) {
      terms[j] = b[j] == kNegInf
                     ? kNegInf
                     : b[j] + model.log_transition_density(next_smoothed.particles[j], at_t.particles[i]);
    }
    log_out[i] = log_w[i] + log_sum_exp(terms);
  });

  out_weights.assign(n, 0.0);
  degenerate = !normalize_log_weights(log_out, out_weights);
  if (degenerate) out_weights = at_t.weights;
}

}  // namespace detail

/// Backward pass over a filtered sequence. Particle locations are kept; only
/// weights are revised. The final day is returned unchanged.
template <StateSpaceModel Model>
SmoothResult<typename Model::state_type> smooth(const Model& model,
                                                const std::vector<Ensemble<typename Model::state_type>>& filtered,
                                                const SmoothOptions& options = {}) {
  using State = typename Model::state_type;
  SmoothResult<State> result;
  result.ensembles = filtered;
  result.degenerate.assign(filtered.size(), false);
  if (filtered.size() < 2 || options.method == Smoother::None) return result;

  const std::size_t T = filtered.size();
  if (options.method == Smoother::FFBSm) {
    for (std::size_t t = T - 1; t-- > 0;) {
      bool degenerate = false;
      detail::ffbsm_step(model, filtered[t], result.ensembles[t + 1], result.ensembles[t].weights, options.workers,
                         degenerate);
      result.degenerate[t] = degenerate;
    }
    return result;
  }

  // Backward simulation: draw whole trajectories from the backward kernel and
  // report the fraction of trajectories passing through each particle.
  const StreamFamily streams(options.seed);
  const std::size_t K = options.trajectories ? options.trajectories : filtered.back().size();
  std::vector<std::size_t> current(K);
  {
    Stream rng = streams.at(T - 1, 0);
    const auto& w = filtered.back().weights;
    for (std::size_t k = 0; k < K; ++k) current[k] = systematic_indices(w, 1, rng.uniform())[0];
  }
  for (std::size_t t = T - 1; t-- > 0;) {
    const auto& ens = filtered[t];
    const std::size_t n = ens.size();
    std::vector<std::size_t> chosen(K);
    std::vector<char> failed(K, 0);
    parallel_for(K, options.workers, [&](std::size_t k) {
      Stream rng = streams.at(t, k);
      std::vector<double> lw(n);
      const auto& x_next = filtered[t + 1].particles[current[k]];
      for (std::size_t i = 0; i < n; ++i) {
        lw[i] = ens.weights[i] > 0.0 ? std::log(ens.weights[i]) + model.log_transition_density(x_next, ens.particles[i])
                                     : -std::numeric_limits<double>::infinity();
      }
      std::vector<double> w(n);
      if (!normalize_log_weights(lw, w)) {
        failed[k] = 1;
        w = ens.weights;
      }
      chosen[k] = systematic_indices(w, 1, rng.uniform())[0];
    });
    current = chosen;
    auto& out = result.ensembles[t].weights;
    out.assign(n, 0.0);
    for (std::size_t c : current) out[c] += 1.0 / static_cast<double>(K);
    result.degenerate[t] = std::any_of(failed.begin(), failed.end(), [](char f) { return f != 0; });
  }
  return result;
}

}  // namespace dart
