#pragma once

// Numeric CSV with one header line. Numbers are written in the shortest form
// that reads back to the same double, so logs are byte-stable and lossless.

#include "identification.hpp"
#include "sim.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace mrav::csv {

struct Table
{
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::vector<std::string> warnings;

  int column(const std::string & name) const
  {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (columns[i] == name) { return static_cast<int>(i); }
    }
    return -1;
  }

  int require(const std::string & name) const
  {
    const int c = column(name);
    if (c < 0) { throw ConfigError("CSV has no column '" + name + "'"); }
    return c;
  }

  std::vector<double> values(int c) const
  {
    std::vector<double> v;
    v.reserve(rows.size());
    for (const auto & r : rows) { v.push_back(r[static_cast<std::size_t>(c)]); }
    return v;
  }
};

inline void append_number(std::string & out, double v)
{
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

inline std::string to_string(const std::vector<std::string> & columns, const std::vector<std::vector<double>> & rows)
{
  std::string out;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (i > 0) { out += ','; }
    out += columns[i];
  }
  out += '\n';
  for (const auto & r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i > 0) { out += ','; }
      append_number(out, r[i]);
    }
    out += '\n';
  }
  return out;
}

inline void write(const std::filesystem::path & path, const std::vector<std::string> & columns, const std::vector<std::vector<double>> & rows)
{
  std::ofstream f(path, std::ios::binary);
  if (!f) { throw ConfigError("cannot write " + path.string()); }
  const std::string s = to_string(columns, rows);
  f.write(s.data(), static_cast<std::streamsize>(s.size()));
  if (!f) { throw ConfigError("write failed: " + path.string()); }
}

inline void write(const std::filesystem::path & path, const SimLog & log) { write(path, log.columns, log.rows); }

/// Parses text. Short or unparsable rows are skipped with a warning naming the line.
inline Table parse(const std::string & text, const std::string & origin = "<csv>")
{
  Table t;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') { line.pop_back(); }
    if (line.empty()) { continue; }
    if (t.columns.empty()) {
      std::stringstream ls(line);
      std::string c;
      while (std::getline(ls, c, ',')) { t.columns.push_back(c); }
      continue;
    }
    std::vector<double> row;
    row.reserve(t.columns.size());
    const char * p = line.data();
    const char * end = p + line.size();
    bool bad = false;
    while (p <= end) {
      const char * comma = std::find(p, end, ',');
      double v = 0.0;
      const auto res = std::from_chars(p, comma, v);
      if (res.ec != std::errc() || res.ptr != comma) {
        bad = true;
        break;
      }
      row.push_back(v);
      p = comma + 1;
    }
    if (bad || row.size() != t.columns.size()) {
      t.warnings.push_back(
        origin + ":" + std::to_string(lineno) + ": row has " + (bad ? std::string("an unreadable field") : std::to_string(row.size()) + " of "
        + std::to_string(t.columns.size()) + " fields") + ", skipped");
      continue;
    }
    t.rows.push_back(std::move(row));
  }
  if (t.columns.empty()) { throw ConfigError(origin + ": empty CSV"); }
  return t;
}

inline Table read(const std::filesystem::path & path)
{
  std::ifstream f(path, std::ios::binary);
  if (!f) { throw ConfigError("cannot open " + path.string()); }
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str(), path.string());
}

inline SimLog to_simlog(const Table & t) { return {t.columns, t.rows}; }

/// Bench log with columns t, w_des, w_meas.
inline ident::SpeedLog speed_log(const Table & t)
{
  ident::SpeedLog log{t.values(t.require("t")), t.values(t.require("w_des")), t.values(t.require("w_meas"))};
  log.validate();
  return log;
}

inline void write_speed_log(const std::filesystem::path & path, const ident::SpeedLog & log)
{
  std::vector<std::vector<double>> rows;
  for (std::size_t k = 0; k < log.t.size(); ++k) { rows.push_back({log.t[k], log.w_desired[k], log.w_measured[k]}); }
  write(path, {"t", "w_des", "w_meas"}, rows);
}

/// Flight log with columns t, px, py, pz, r11..r33 (row-major R), w1..wn.
inline ident::FlightLog flight_log(const Table & t)
{
  ident::FlightLog log;
  const int ct = t.require("t");
  const int cp[3] = {t.require("px"), t.require("py"), t.require("pz")};
  int cr[9];
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) { cr[3 * i + j] = t.require("r" + std::to_string(i + 1) + std::to_string(j + 1)); }
  }
  std::vector<int> cw;
  for (int i = 1; t.column("w" + std::to_string(i)) >= 0; ++i) { cw.push_back(t.column("w" + std::to_string(i))); }
  if (cw.empty()) { throw ConfigError("flight log has no rotor speed columns w1..wn"); }
  for (const auto & r : t.rows) {
    log.t.push_back(r[ct]);
    log.p.emplace_back(r[cp[0]], r[cp[1]], r[cp[2]]);
    Mat3 rot;
    for (int i = 0; i < 9; ++i) { rot(i / 3, i % 3) = r[cr[i]]; }
    log.r.push_back(rot);
    Vec w(static_cast<Eigen::Index>(cw.size()));
    for (std::size_t i = 0; i < cw.size(); ++i) { w(static_cast<Eigen::Index>(i)) = r[cw[i]]; }
    log.w.push_back(w);
  }
  log.validate();
  return log;
}

inline void write_flight_log(const std::filesystem::path & path, const ident::FlightLog & log)
{
  std::vector<std::string> cols = {"t", "px", "py", "pz"};
  for (int i = 1; i <= 3; ++i) {
    for (int j = 1; j <= 3; ++j) { cols.push_back("r" + std::to_string(i) + std::to_string(j)); }
  }
  const int n = log.w.empty() ? 0 : static_cast<int>(log.w.front().size());
  for (int i = 1; i <= n; ++i) { cols.push_back("w" + std::to_string(i)); }
  std::vector<std::vector<double>> rows;
  for (std::size_t k = 0; k < log.t.size(); ++k) {
    std::vector<double> r = {log.t[k], log.p[k](0), log.p[k](1), log.p[k](2)};
    for (int i = 0; i < 9; ++i) { r.push_back(log.r[k](i / 3, i % 3)); }
    for (int i = 0; i < n; ++i) { r.push_back(log.w[k](i)); }
    rows.push_back(std::move(r));
  }
  write(path, cols, rows);
}

}  // namespace mrav::csv
