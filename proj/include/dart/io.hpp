#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dart/config.hpp"
#include "dart/errors.hpp"
#include "dart/estimate.hpp"
#include "dart/observation.hpp"
#include "dart/scenario.hpp"

namespace dart {

/// Shortest round-trip decimal form.
inline std::string format_number(double v) {
  if (v == 0.0) return "0";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline std::string format_optional(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

/// Daily counts from a `date,count` CSV. Interior calendar gaps are filled
/// with zero and marked imputed; a message per gap goes to `warnings`.
inline CaseSeries ingest_csv(std::istream& in, std::vector<std::string>* warnings = nullptr) {
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& what) { throw ParseError("line " + std::to_string(lineno) + ": " + what); };

  bool header_seen = false;
  CaseSeries out;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (trim(line).empty()) continue;
    const auto fields = split(line, ',');
    if (!header_seen) {
      if (fields.size() != 2 || fields[0] != "date" || fields[1] != "count") fail("expected header 'date,count'");
      header_seen = true;
      continue;
    }
    if (fields.size() != 2) fail("expected 2 fields, got " + std::to_string(fields.size()));
    Date date;
    try {
      date = parse_date(fields[0]);
    } catch (const ParseError& e) {
      fail(e.what());
    }
    double count = 0.0;
    const auto& c = fields[1];
    const auto [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), count);
    if (c.empty() || ec != std::errc{} || ptr != c.data() + c.size() || !std::isfinite(count)) {
      fail("count '" + c + "' is not a number");
    }
    if (count < 0.0) {
      throw NegativeCount("line " + std::to_string(lineno) + ": negative count " + c + " on " + fields[0]);
    }
    if (!out.dates.empty()) {
      const Date prev = out.dates.back();
      if (date <= prev) {
        throw NonMonotonicDates("line " + std::to_string(lineno) + ": date " + fields[0] + " does not follow " +
                                format_date(prev));
      }
      for (Date gap = prev + std::chrono::days(1); gap < date; gap += std::chrono::days(1)) {
        out.dates.push_back(gap);
        out.counts.push_back(0.0);
        out.imputed.push_back(true);
        if (warnings) warnings->push_back("missing date " + format_date(gap) + " filled with 0");
      }
    }
    out.dates.push_back(date);
    out.counts.push_back(count);
    out.imputed.push_back(false);
  }
  if (!header_seen) throw ParseError("line 1: expected header 'date,count'");
  if (out.size() == 0) throw ParseError("no data rows");
  return out;
}

inline CaseSeries ingest_csv(const std::string& path, std::vector<std::string>* warnings = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open input file '" + path + "'");
  return ingest_csv(in, warnings);
}

inline void write_observations_csv(std::ostream& out, const CaseSeries& series) {
  out << "date,count\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    out << format_date(series.dates[i]) << ',' << format_number(series.counts[i]) << '\n';
  }
}

inline void write_scenario_csv(std::ostream& out, const Scenario& s) {
  out << "day,R_true,j_true,C_bar,C_noisy\n";
  for (std::size_t t = 0; t < s.r_true.size(); ++t) {
    out << t << ',' << format_number(s.r_true[t]) << ',' << format_number(s.j_true[t]) << ','
        << format_number(s.c_bar[t]) << ',' << format_number(s.c_noisy[t]) << '\n';
  }
}

inline constexpr const char* kEstimatesHeader =
    "date,R_median,R_lo95,R_hi95,j_median,j_lo95,j_hi95,p_change,C_pred_median,C_pred_lo95,C_pred_hi95,flags";

inline void write_estimates_csv(std::ostream& out, const EstimateSeries& est) {
  out << kEstimatesHeader << '\n';
  for (const auto& row : est.rows) {
    out << format_date(row.date) << ',';
    for (const auto& iv : {row.r, row.j}) {
      if (iv) {
        out << format_number(iv->median) << ',' << format_number(iv->lo) << ',' << format_number(iv->hi) << ',';
      } else {
        out << ",,,";
      }
    }
    out << format_optional(row.p_change) << ',' << format_number(row.c_pred.median) << ','
        << format_number(row.c_pred.lo) << ',' << format_number(row.c_pred.hi) << ',' << flags_to_string(row.flags)
        << '\n';
  }
}

namespace detail {

inline std::vector<std::string> read_table(std::istream& in, const std::string& expected_header, std::size_t columns,
                                           std::vector<std::vector<std::string>>& rows) {
  std::string line;
  int lineno = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split(line, ',');
    if (header.empty()) {
      if (line != expected_header) throw ParseError("line 1: expected header '" + expected_header + "'");
      header = std::move(fields);
      continue;
    }
    if (fields.size() != columns) {
      throw ParseError("line " + std::to_string(lineno) + ": expected " + std::to_string(columns) + " fields");
    }
    rows.push_back(std::move(fields));
  }
  if (header.empty()) throw ParseError("missing header '" + expected_header + "'");
  return header;
}

inline std::optional<double> optional_field(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return parse_double(s, "field");
}

}  // namespace detail

inline Scenario read_scenario_csv(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  detail::read_table(in, "day,R_true,j_true,C_bar,C_noisy", 5, rows);
  Scenario s;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (parse_integer<long>(rows[i][0], "day") != static_cast<long>(i)) {
      throw ParseError("scenario days must run 0, 1, 2, ...");
    }
    s.r_true.push_back(parse_double(rows[i][1], "R_true"));
    s.j_true.push_back(parse_double(rows[i][2], "j_true"));
    s.c_bar.push_back(parse_double(rows[i][3], "C_bar"));
    s.c_noisy.push_back(parse_double(rows[i][4], "C_noisy"));
  }
  return s;
}

inline EstimateSeries read_estimates_csv(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  detail::read_table(in, kEstimatesHeader, 12, rows);
  EstimateSeries est;
  for (const auto& f : rows) {
    EstimateRow row;
    row.date = parse_date(f[0]);
    auto interval = [&](std::size_t at) -> std::optional<Interval> {
      const auto med = detail::optional_field(f[at]);
      const auto lo = detail::optional_field(f[at + 1]);
      const auto hi = detail::optional_field(f[at + 2]);
      if (!med || !lo || !hi) return std::nullopt;
      return Interval{*lo, *med, *hi};
    };
    row.r = interval(1);
    row.j = interval(4);
    row.p_change = detail::optional_field(f[7]);
    const auto c = interval(8);
    if (!c) throw ParseError("C_pred columns must not be empty");
    row.c_pred = *c;
    for (const auto& flag : split(f[11], ';')) {
      if (flag == "weight_collapse") row.flags |= kFlagWeightCollapse;
      if (flag == "smoothing_degenerate") row.flags |= kFlagSmoothingDegenerate;
      if (flag == "imputed") row.flags |= kFlagImputed;
    }
    est.rows.push_back(std::move(row));
  }
  return est;
}

}  // namespace dart
