#pragma once

#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dart/config.hpp"
#include "dart/estimate.hpp"
#include "dart/io.hpp"
#include "dart/scenario.hpp"

namespace dart {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitInput = 2,
  kExitInference = 3,
  kExitThreshold = 4,
};

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw ConfigError("failed writing '" + path.string() + "'");
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::filesystem::path output_dir(const RunConfig& cfg) {
  std::filesystem::path dir(cfg.get("output"));
  std::filesystem::create_directories(dir);
  return dir;
}

inline nlohmann::json config_echo(const RunConfig& cfg) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : cfg.values()) j[k] = v;
  return j;
}

inline nlohmann::json metrics_json(const ErrorMetrics& m) {
  return {{"mean_diff", m.mean_diff}, {"sd_diff", m.sd_diff}, {"mean_abs_diff", m.mean_abs_diff}, {"n", m.n}};
}

}  // namespace detail

/// Writes scenario.csv, scenario.json and observations.csv (the noisy series
/// in the `date,count` input format).
inline int simulate_cmd(const RunConfig& cfg, std::ostream& log) {
  ScenarioConfig sc;
  Date start{};
  std::filesystem::path dir;
  try {
    sc = resolve_scenario(cfg);
    start = parse_date(cfg.get("start_date"));
    dir = detail::output_dir(cfg);
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return kExitInput;
  }
  const Scenario s = generate(sc);

  std::ostringstream csv;
  write_scenario_csv(csv, s);
  std::ostringstream obs;
  write_observations_csv(obs, CaseSeries::from_counts(s.c_noisy, start));

  nlohmann::json meta;
  meta["version"] = kVersion;
  meta["seed"] = sc.seed;
  meta["start_date"] = format_date(start);
  meta["horizon"] = sc.horizon;
  meta["change_days"] = s.change_days;
  meta["config"] = detail::config_echo(cfg);
  meta["generation_time_pmf"] = {{"offset", sc.generation_time.offset_start()}, {"probs", sc.generation_time.probs()}};
  meta["observation_pmf"] = {{"offset", sc.kernel.pmf.offset_start()}, {"probs", sc.kernel.pmf.probs()}};

  try {
    detail::write_file(dir / "scenario.csv", csv.str());
    detail::write_file(dir / "observations.csv", obs.str());
    detail::write_file(dir / "scenario.json", meta.dump(2) + "\n");
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitOk;
}

/// Writes estimates.csv and run_meta.json. Rows start on the first
/// assimilated day.
inline int estimate_cmd(const RunConfig& cfg, std::ostream& log) {
  ModelParams params;
  EngineConfig engine;
  CaseSeries obs;
  std::filesystem::path dir;
  std::vector<std::string> warnings;
  try {
    params = resolve_model(cfg);
    engine = resolve_engine(cfg);
    if (!cfg.has("input")) throw ConfigError("estimate needs --input");
    obs = ingest_csv(cfg.get("input"), &warnings);
    dir = detail::output_dir(cfg);
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return kExitInput;
  }
  for (const auto& w : warnings) log << "warning: " << w << '\n';

  RunResult result;
  try {
    result = run(obs, params, engine);
  } catch (const Error& e) {
    log << "error: inference failed: " << e.what() << '\n';
    return kExitInference;
  }

  std::ostringstream csv;
  write_estimates_csv(csv, result.estimates);

  nlohmann::json meta;
  meta["version"] = kVersion;
  meta["seed"] = engine.seed;
  meta["config"] = detail::config_echo(cfg);
  meta["first_date"] = format_date(obs.dates[result.first_index]);
  meta["delay"] = result.delay;
  meta["ess"] = result.ess;
  std::size_t collapsed = 0;
  for (bool c : result.collapsed) collapsed += c ? 1 : 0;
  meta["weight_collapse_days"] = collapsed;
  meta["warnings"] = warnings;

  try {
    detail::write_file(dir / "estimates.csv", csv.str());
    detail::write_file(dir / "run_meta.json", meta.dump(2) + "\n");
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitOk;
}

struct ValidationReport {
  ErrorMetrics r;
  ErrorMetrics j;
  double c_coverage = 0.0;
  std::size_t c_days = 0;
  std::vector<ChangeEvent> changes;
  std::vector<std::string> failed;
};

/// Compares estimates with the scenario truth. Estimate rows map to scenario
/// day (date - start). Coverage skips the first `warmup` estimate rows.
inline ValidationReport evaluate(const Scenario& truth, const EstimateSeries& est, Date start,
                                 std::span<const int> change_days, std::size_t warmup, const RunConfig& cfg) {
  const long horizon = static_cast<long>(truth.r_true.size());
  std::vector<double> r_true, r_est, j_true, j_est, c_true, c_lo, c_hi;
  std::vector<double> p_change(static_cast<std::size_t>(horizon), 0.0);
  for (std::size_t i = 0; i < est.rows.size(); ++i) {
    const auto& row = est.rows[i];
    const long day = (row.date - start).count();
    if (day < 0 || day >= horizon) throw LengthMismatch("estimate date " + format_date(row.date) + " is outside the scenario");
    const auto t = static_cast<std::size_t>(day);
    if (row.p_change) p_change[t] = *row.p_change;
    // Errors and coverage are scored after the warm-up rows.
    if (i < warmup) continue;
    if (row.r) {
      r_true.push_back(truth.r_true[t]);
      r_est.push_back(row.r->median);
    }
    if (row.j) {
      j_true.push_back(truth.j_true[t]);
      j_est.push_back(row.j->median);
    }
    c_true.push_back(truth.c_bar[t]);
    c_lo.push_back(row.c_pred.lo);
    c_hi.push_back(row.c_pred.hi);
  }

  ValidationReport rep;
  rep.r = error_metrics(r_true, r_est);
  rep.j = error_metrics(j_true, j_est);
  rep.c_coverage = coverage(c_true, c_lo, c_hi);
  rep.c_days = c_true.size();
  rep.changes = change_detection_score(p_change, change_days, cfg.integer<int>("change_window"),
                                       cfg.number("change_threshold"));

  if (rep.r.n == 0) rep.failed.push_back("r_estimates_missing");
  if (rep.r.mean_abs_diff > cfg.number("max_r_mean_abs")) rep.failed.push_back("r_mean_abs");
  if (rep.r.sd_diff > cfg.number("max_r_sd")) rep.failed.push_back("r_sd");
  if (rep.c_coverage < cfg.number("min_c_coverage")) rep.failed.push_back("c_coverage");
  std::size_t hits = 0;
  for (const auto& ev : rep.changes) hits += ev.hit ? 1 : 0;
  const auto needed = std::min<std::size_t>(cfg.integer<std::size_t>("min_change_hits"), rep.changes.size());
  if (hits < needed) rep.failed.push_back("change_hits");
  return rep;
}

/// Writes metrics.json. With `regenerate`, runs simulate and estimate into
/// the output directory first.
inline int validate_cmd(const RunConfig& cfg, bool regenerate, std::ostream& log) {
  std::filesystem::path dir;
  try {
    dir = detail::output_dir(cfg);
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return kExitInput;
  }
  if (regenerate) {
    if (const int rc = simulate_cmd(cfg, log); rc != kExitOk) return rc;
    RunConfig est_cfg = cfg;
    est_cfg.set("input", (dir / "observations.csv").string());
    if (const int rc = estimate_cmd(est_cfg, log); rc != kExitOk) return rc;
  }

  Scenario truth;
  EstimateSeries est;
  Date start{};
  ScenarioConfig sc;
  std::size_t warmup = 0;
  ValidationReport rep;
  try {
    std::istringstream scen(detail::read_file(dir / "scenario.csv"));
    truth = read_scenario_csv(scen);
    std::istringstream estimates(detail::read_file(dir / "estimates.csv"));
    est = read_estimates_csv(estimates);
    start = parse_date(cfg.get("start_date"));
    sc = resolve_scenario(cfg);
    warmup = static_cast<std::size_t>(resolve_model(cfg).history_length());
    std::vector<int> days;
    for (const auto& cp : sc.change_points) days.push_back(cp.day);
    rep = evaluate(truth, est, start, days, warmup, cfg);
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return kExitInput;
  }

  nlohmann::json out;
  out["version"] = kVersion;
  out["R"] = detail::metrics_json(rep.r);
  out["j"] = detail::metrics_json(rep.j);
  out["C_coverage"] = rep.c_coverage;
  out["C_coverage_days"] = rep.c_days;
  nlohmann::json events = nlohmann::json::array();
  for (const auto& ev : rep.changes) {
    nlohmann::json e;
    e["true_day"] = ev.true_day;
    e["hit"] = ev.hit;
    e["detected_day"] = ev.detected_day ? nlohmann::json(*ev.detected_day) : nlohmann::json(nullptr);
    e["latency"] = ev.latency ? nlohmann::json(*ev.latency) : nlohmann::json(nullptr);
    events.push_back(e);
  }
  out["change_detection"] = events;
  out["thresholds"] = {{"max_r_mean_abs", cfg.number("max_r_mean_abs")},
                       {"max_r_sd", cfg.number("max_r_sd")},
                       {"min_c_coverage", cfg.number("min_c_coverage")},
                       {"min_change_hits", cfg.integer("min_change_hits")}};
  out["failed"] = rep.failed;
  out["passed"] = rep.failed.empty();
  try {
    detail::write_file(dir / "metrics.json", out.dump(2) + "\n");
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return kExitInput;
  }
  if (!rep.failed.empty()) {
    log << "validation failed:";
    for (const auto& f : rep.failed) log << ' ' << f;
    log << '\n';
    return kExitThreshold;
  }
  return kExitOk;
}

/// Entry point shared by the executable and the tests. args[0] is the
/// program name.
inline int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Particle-filter estimation of time-varying reproduction numbers", "dart"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  std::string config_path;
  bool no_smoothing = false;
  bool regenerate = false;
  std::string particles;
  std::map<std::string, std::string> overrides;

  std::vector<CLI::App*> subs{app.add_subcommand("simulate", "generate a synthetic scenario"),
                              app.add_subcommand("estimate", "estimate R, infections and change points from counts"),
                              app.add_subcommand("validate", "score estimates against a scenario")};
  for (auto* sub : subs) {
    sub->add_option("--config", config_path, "key = value configuration file");
    sub->add_option("--particles", particles, "alias of --n_particles");
    sub->add_flag("--no-smoothing", no_smoothing, "report filtered estimates");
    for (const auto& key : config_keys()) {
      sub->add_option(std::string("--") + key.name, overrides[key.name], key.help);
    }
  }
  subs[2]->add_flag("--regenerate", regenerate, "run simulate and estimate first");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  if (!rev.empty()) rev.pop_back();
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  RunConfig cfg;
  try {
    if (!config_path.empty()) cfg.load_file(config_path);
    CLI::App* active = app.get_subcommands().front();
    for (const auto& key : config_keys()) {
      if (active->count(std::string("--") + key.name) > 0) cfg.set(key.name, overrides[key.name]);
    }
    if (!particles.empty()) cfg.set("n_particles", particles);
    if (no_smoothing) cfg.set("smoother", "none");
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  if (name == "simulate") return simulate_cmd(cfg, err);
  if (name == "estimate") return estimate_cmd(cfg, err);
  return validate_cmd(cfg, regenerate, err);
}

}  // namespace dart
