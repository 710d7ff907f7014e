#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dart/delay_dist.hpp"
#include "dart/errors.hpp"
#include "dart/estimate.hpp"
#include "dart/latent_model.hpp"
#include "dart/observation.hpp"
#include "dart/scenario.hpp"

namespace dart {

struct ConfigKey {
  const char* name;
  const char* default_value;
  const char* help;
};

/// Every recognised configuration key with its default. An empty default
/// means "unset".
inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys{
      {"generation_time", "{gamma, 4.44, 1.89}", "generation-time distribution {family, param1, param2}"},
      {"incubation", "{lognormal, 1.644, 0.363}", "incubation distribution"},
      {"onset_to_report", "", "onset-to-report distribution (confirmed data)"},
      {"infection_to_death", "", "infection-to-death distribution (death data)"},
      {"truncation_threshold", "0.1", "per-day mass below which delay bins are dropped"},
      {"observation_kind", "onset", "onset | confirmed | death"},
      {"mortality_rate", "", "fraction of infections reported as deaths"},
      {"variance_window", "7", "moving-average window for the reporting variance"},
      {"variance_floor", "1", "absolute floor on the reporting variance"},
      {"variance_floor_relative", "0.05", "relative floor: variance >= (x * moving average)^2"},
      {"likelihood", "gaussian", "gaussian | poisson"},
      {"sigma_R", "0.1", "sd of the gradual R walk"},
      {"delta", "0.5", "headroom of the abrupt-change reset"},
      {"alpha", "0.95", "probability of the gradual mode"},
      {"n_particles", "200", "ensemble size"},
      {"r_prior", "[1, 5]", "uniform prior interval for the initial R"},
      {"t_phi", "0", "infection window length (0 = minimum required)"},
      {"start_threshold", "10", "estimation starts on the first day with more reports"},
      {"ess_threshold_fraction", "0.5", "resample when ESS falls below this fraction of N"},
      {"resampling", "systematic", "systematic | none"},
      {"smoother", "ffbsm", "ffbsm | backward_sim | none"},
      {"workers", "1", "worker threads for the filter and smoother"},
      {"seed", "1", "random seed"},
      {"r0", "3.2", "scenario: initial R"},
      {"walk_sd", "0.05", "scenario: sd of the R random walk"},
      {"change_points", "23:1.6, 33:0.5, 83:3.0", "scenario: day:R pairs"},
      {"horizon", "120", "scenario: number of simulated days"},
      {"j_init", "1", "scenario: infections on day 0"},
      {"noise", "1", "scenario: reporting noise multiplier N"},
      {"simulation_mode", "poisson", "scenario: poisson | deterministic"},
      {"start_date", "2020-01-01", "scenario: calendar date of day 0"},
      {"max_r_mean_abs", "0.2", "validate: bound on mean |R error|"},
      {"max_r_sd", "0.3", "validate: bound on the sd of R errors"},
      {"min_c_coverage", "0.85", "validate: lower bound on C band coverage"},
      {"min_change_hits", "3", "validate: change points that must be detected"},
      {"change_window", "3", "validate: detection window in days"},
      {"change_threshold", "0.3", "validate: p_change peak threshold"},
      {"input", "", "input CSV (date,count)"},
      {"output", ".", "output directory"},
  };
  return keys;
}

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline double parse_double(std::string_view text, std::string_view key) {
  const std::string s = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ConfigError("'" + std::string(key) + "' expects a number, got '" + s + "'");
  }
  return v;
}

template <typename Int>
Int parse_integer(std::string_view text, std::string_view key) {
  const std::string s = trim(text);
  Int v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ConfigError("'" + std::string(key) + "' expects an integer, got '" + s + "'");
  }
  return v;
}

inline Date parse_date(std::string_view text) {
  const std::string s = trim(text);
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') throw ParseError("expected an ISO date YYYY-MM-DD, got '" + s + "'");
  int y = 0;
  unsigned m = 0, d = 0;
  auto num = [&](std::size_t pos, std::size_t len, auto& out) {
    const auto [ptr, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, out);
    if (ec != std::errc{} || ptr != s.data() + pos + len) throw ParseError("expected an ISO date YYYY-MM-DD, got '" + s + "'");
  };
  num(0, 4, y);
  num(5, 2, m);
  num(8, 2, d);
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) throw ParseError("invalid calendar date '" + s + "'");
  return Date{ymd};
}

inline std::string format_date(Date date) {
  const std::chrono::year_month_day ymd{date};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

/// Raw key-value configuration. Later layers override earlier ones:
/// defaults, then the config file, then command-line flags.
class RunConfig {
 public:
  RunConfig() {
    for (const auto& k : config_keys()) values_[k.name] = k.default_value;
  }

  static bool known(std::string_view key) {
    const auto& keys = config_keys();
    return std::any_of(keys.begin(), keys.end(), [&](const ConfigKey& k) { return key == k.name; });
  }

  void set(std::string_view key, std::string_view value) {
    if (!known(key)) throw ConfigError("unknown configuration key '" + std::string(key) + "'");
    values_[std::string(key)] = trim(value);
  }

  const std::string& get(std::string_view key) const {
    const auto it = values_.find(std::string(key));
    if (it == values_.end()) throw ConfigError("unknown configuration key '" + std::string(key) + "'");
    return it->second;
  }

  bool has(std::string_view key) const { return !get(key).empty(); }

  const std::map<std::string, std::string>& values() const noexcept { return values_; }

  /// `key = value` lines; `#` starts a comment.
  void load_text(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const std::string body = trim(line);
      if (body.empty()) continue;
      const auto eq = body.find('=');
      if (eq == std::string::npos) {
        throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
      }
      const std::string key = trim(std::string_view(body).substr(0, eq));
      try {
        set(key, std::string_view(body).substr(eq + 1));
      } catch (const ConfigError& e) {
        throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
      }
    }
  }

  void load_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    load_text(ss.str());
  }

  double number(std::string_view key) const { return parse_double(get(key), key); }
  template <typename Int = long>
  Int integer(std::string_view key) const {
    return parse_integer<Int>(get(key), key);
  }

 private:
  std::map<std::string, std::string> values_;
};

inline ContinuousDelaySpec parse_delay_spec(std::string_view text, std::string_view key) {
  std::string s = trim(text);
  if (s.size() < 2 || s.front() != '{' || s.back() != '}') {
    throw ConfigError("'" + std::string(key) + "' expects {family, param1, param2}");
  }
  const auto parts = split(std::string_view(s).substr(1, s.size() - 2), ',');
  if (parts.size() != 3) throw ConfigError("'" + std::string(key) + "' expects {family, param1, param2}");
  ContinuousDelaySpec spec;
  std::string family = parts[0];
  std::transform(family.begin(), family.end(), family.begin(), [](unsigned char c) { return std::tolower(c); });
  if (family == "gamma") {
    spec.family = DelayFamily::Gamma;
  } else if (family == "lognormal") {
    spec.family = DelayFamily::Lognormal;
  } else if (family == "weibull") {
    spec.family = DelayFamily::Weibull;
  } else {
    throw ConfigError("'" + std::string(key) + "': unknown family '" + parts[0] + "'");
  }
  spec.param1 = parse_double(parts[1], key);
  spec.param2 = parse_double(parts[2], key);
  return spec;
}

inline std::vector<ChangePoint> parse_change_points(std::string_view text) {
  std::vector<ChangePoint> out;
  if (trim(text).empty()) return out;
  for (const auto& item : split(text, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError("'change_points' expects day:R pairs, got '" + item + "'");
    out.push_back({parse_integer<int>(std::string_view(item).substr(0, colon), "change_points"),
                   parse_double(std::string_view(item).substr(colon + 1), "change_points")});
  }
  return out;
}

template <typename Enum>
Enum parse_choice(const RunConfig& cfg, std::string_view key, std::initializer_list<std::pair<const char*, Enum>> options) {
  const std::string& v = cfg.get(key);
  for (const auto& [name, value] : options) {
    if (v == name) return value;
  }
  std::string allowed;
  for (const auto& [name, value] : options) allowed += allowed.empty() ? name : std::string("|") + name;
  throw ConfigError("'" + std::string(key) + "' must be one of " + allowed + ", got '" + v + "'");
}

/// Discretised generation time. Day 0 is excluded: nobody infects on the day
/// they are infected.
inline DelayPMF resolve_generation_time(const RunConfig& cfg) {
  DiscretizeOptions opts;
  opts.first_day = 1;
  return discretize(parse_delay_spec(cfg.get("generation_time"), "generation_time"), cfg.number("truncation_threshold"),
                    true, opts);
}

inline ObservationKernel resolve_kernel(const RunConfig& cfg) {
  const double threshold = cfg.number("truncation_threshold");
  auto optional_pmf = [&](const char* key) -> std::optional<DelayPMF> {
    if (!cfg.has(key)) return std::nullopt;
    return discretize(parse_delay_spec(cfg.get(key), key), threshold);
  };
  const auto kind = parse_choice<ObservationKind>(
      cfg, "observation_kind",
      {{"onset", ObservationKind::Onset}, {"confirmed", ObservationKind::Confirmed}, {"death", ObservationKind::Death}});
  std::optional<double> mortality;
  if (cfg.has("mortality_rate")) mortality = cfg.number("mortality_rate");
  return build_kernel(kind, optional_pmf("incubation"), optional_pmf("onset_to_report"),
                      optional_pmf("infection_to_death"), mortality);
}

inline ModelParams resolve_model(const RunConfig& cfg) {
  ModelParams p;
  p.sigma_r = cfg.number("sigma_R");
  p.delta = cfg.number("delta");
  p.alpha = cfg.number("alpha");
  p.w = resolve_generation_time(cfg);
  p.kernel = resolve_kernel(cfg);
  p.t_phi = cfg.integer<int>("t_phi");
  const std::string prior = trim(cfg.get("r_prior"));
  if (prior.size() < 2 || prior.front() != '[' || prior.back() != ']') throw ConfigError("'r_prior' expects [lo, hi]");
  const auto bounds = split(std::string_view(prior).substr(1, prior.size() - 2), ',');
  if (bounds.size() != 2) throw ConfigError("'r_prior' expects [lo, hi]");
  p.r_prior_lo = parse_double(bounds[0], "r_prior");
  p.r_prior_hi = parse_double(bounds[1], "r_prior");
  p.likelihood = parse_choice<LikelihoodMode>(cfg, "likelihood",
                                              {{"gaussian", LikelihoodMode::Gaussian}, {"poisson", LikelihoodMode::Poisson}});
  p.validate();
  return p;
}

inline EngineConfig resolve_engine(const RunConfig& cfg) {
  EngineConfig e;
  const long n = cfg.integer("n_particles");
  if (n < 1) throw ConfigError("'n_particles' must be positive");
  e.n_particles = static_cast<std::size_t>(n);
  e.start_threshold = cfg.number("start_threshold");
  e.variance_window = cfg.integer<int>("variance_window");
  if (e.variance_window < 1 || e.variance_window % 2 == 0) throw ConfigError("'variance_window' must be odd and positive");
  e.variance_floor.absolute = cfg.number("variance_floor");
  e.variance_floor.relative = cfg.number("variance_floor_relative");
  if (!(e.variance_floor.absolute > 0.0) || !(e.variance_floor.relative >= 0.0)) {
    throw ConfigError("variance floors must be positive");
  }
  e.filter.ess_threshold_fraction = cfg.number("ess_threshold_fraction");
  e.filter.resampling =
      parse_choice<Resampling>(cfg, "resampling", {{"systematic", Resampling::Systematic}, {"none", Resampling::None}});
  const long workers = cfg.integer("workers");
  if (workers < 1) throw ConfigError("'workers' must be positive");
  e.filter.workers = static_cast<unsigned>(workers);
  e.smoother = parse_choice<Smoother>(
      cfg, "smoother",
      {{"ffbsm", Smoother::FFBSm}, {"backward_sim", Smoother::BackwardSimulation}, {"none", Smoother::None}});
  e.seed = cfg.integer<std::uint64_t>("seed");
  return e;
}

inline ScenarioConfig resolve_scenario(const RunConfig& cfg) {
  ScenarioConfig s;
  s.r0 = cfg.number("r0");
  s.walk_sd = cfg.number("walk_sd");
  s.change_points = parse_change_points(cfg.get("change_points"));
  s.horizon = cfg.integer<int>("horizon");
  s.j_init = cfg.number("j_init");
  s.noise_multiplier = cfg.number("noise");
  s.mode = parse_choice<SimulationMode>(
      cfg, "simulation_mode",
      {{"poisson", SimulationMode::PoissonDraw}, {"deterministic", SimulationMode::DeterministicMean}});
  s.generation_time = resolve_generation_time(cfg);
  s.kernel = resolve_kernel(cfg);
  s.seed = cfg.integer<std::uint64_t>("seed");
  s.validate();
  return s;
}

}  // namespace dart
