#pragma once

// Tracking and actuation statistics of a SimLog, in the units of the
// experiment tables: m, deg, N, N/s, s.

#include "rotation.hpp"
#include "sim.hpp"

#include <json.hpp>

#include <array>
#include <cstdio>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace mrav {

struct MetricsReport
{
  std::array<double, 3> e_p_max{}, e_p_rms{};      // m
  std::array<double, 3> e_eta_max{}, e_eta_rms{};  // deg
  double f_min = 0.0, f_max = 0.0;                 // N
  double fdot_min = 0.0, fdot_max = 0.0;           // N/s
  double solve_time_mean = 0.0, solve_time_max = 0.0;
  int backup_count = 0;
  int infeasible_count = 0;
  int rows_used = 0;
  double warmup = 1.0;
  std::vector<std::string> warnings;
};

/// Statistics over rows with t >= warmup. Missing optional columns leave zeros and add a warning.
inline MetricsReport compute_metrics(const SimLog & log, double warmup = 1.0)
{
  MetricsReport m;
  m.warmup = warmup;
  const auto col = [&](const std::string & name) { return log.column(name); };
  const int ct = col("t");
  if (ct < 0) { throw ConfigError("log has no 't' column"); }
  const char * p_names[3] = {"p_x", "p_y", "p_z"};
  const char * pr_names[3] = {"pr_x", "pr_y", "pr_z"};
  const char * e_names[3] = {"roll", "pitch", "yaw"};
  const char * er_names[3] = {"etar_roll", "etar_pitch", "etar_yaw"};
  int cp[3], cpr[3], ce[3], cer[3];
  for (int i = 0; i < 3; ++i) {
    cp[i] = col(p_names[i]);
    cpr[i] = col(pr_names[i]);
    ce[i] = col(e_names[i]);
    cer[i] = col(er_names[i]);
    if (cp[i] < 0 || cpr[i] < 0 || ce[i] < 0 || cer[i] < 0) { throw ConfigError("log lacks position or attitude columns"); }
  }
  std::vector<int> cf, cu;
  for (int i = 1; col("f" + std::to_string(i)) >= 0; ++i) {
    cf.push_back(col("f" + std::to_string(i)));
    if (col("u" + std::to_string(i)) >= 0) { cu.push_back(col("u" + std::to_string(i))); }
  }
  if (cf.empty()) { m.warnings.push_back("log has no force columns f1..fn"); }
  const int cs = col("status"), ctime = col("solve_time");
  if (cs < 0) { m.warnings.push_back("log has no status column"); }
  if (ctime < 0) { m.warnings.push_back("log has no solve_time column"); }

  std::array<double, 3> sp{}, se{};
  double ts = 0.0;
  m.f_min = m.fdot_min = std::numeric_limits<double>::infinity();
  m.f_max = m.fdot_max = -std::numeric_limits<double>::infinity();
  for (const auto & r : log.rows) {
    if (r.size() != log.columns.size()) {
      m.warnings.push_back("row with " + std::to_string(r.size()) + " fields skipped");
      continue;
    }
    if (r[ct] < warmup) { continue; }
    ++m.rows_used;
    for (int i = 0; i < 3; ++i) {
      const double ep = r[cp[i]] - r[cpr[i]];
      const double ee = wrap_angle(r[ce[i]] - r[cer[i]]) * kRadToDeg;
      m.e_p_max[i] = std::max(m.e_p_max[i], std::abs(ep));
      m.e_eta_max[i] = std::max(m.e_eta_max[i], std::abs(ee));
      sp[i] += ep * ep;
      se[i] += ee * ee;
    }
    for (int c : cf) {
      m.f_min = std::min(m.f_min, r[c]);
      m.f_max = std::max(m.f_max, r[c]);
    }
    for (int c : cu) {
      m.fdot_min = std::min(m.fdot_min, r[c]);
      m.fdot_max = std::max(m.fdot_max, r[c]);
    }
    if (cs >= 0) {
      const int st = static_cast<int>(std::lround(r[cs]));
      // an infeasible QP also falls back to the backup input
      if (st != static_cast<int>(SolveStatus::solved)) { ++m.backup_count; }
      if (st == static_cast<int>(SolveStatus::infeasible)) { ++m.infeasible_count; }
    }
    if (ctime >= 0) {
      ts += r[ctime];
      m.solve_time_max = std::max(m.solve_time_max, r[ctime]);
    }
  }
  if (m.rows_used == 0) {
    m.warnings.push_back("no rows after the warm-up window");
    m.f_min = m.f_max = m.fdot_min = m.fdot_max = 0.0;
    return m;
  }
  for (int i = 0; i < 3; ++i) {
    m.e_p_rms[i] = std::sqrt(sp[i] / m.rows_used);
    m.e_eta_rms[i] = std::sqrt(se[i] / m.rows_used);
  }
  if (cf.empty()) { m.f_min = m.f_max = 0.0; }
  if (cu.empty()) { m.fdot_min = m.fdot_max = 0.0; }
  m.solve_time_mean = ts / m.rows_used;
  return m;
}

inline nlohmann::json to_json(const MetricsReport & m)
{
  const auto arr = [](const std::array<double, 3> & a) { return nlohmann::json::array({a[0], a[1], a[2]}); };
  return nlohmann::json{
    {"warmup_s", m.warmup},
    {"rows", m.rows_used},
    {"e_p_max_m", arr(m.e_p_max)},
    {"e_p_rms_m", arr(m.e_p_rms)},
    {"e_eta_max_deg", arr(m.e_eta_max)},
    {"e_eta_rms_deg", arr(m.e_eta_rms)},
    {"f_min_N", m.f_min},
    {"f_max_N", m.f_max},
    {"fdot_min_N_s", m.fdot_min},
    {"fdot_max_N_s", m.fdot_max},
    {"solve_time_mean_s", m.solve_time_mean},
    {"solve_time_max_s", m.solve_time_max},
    {"backup_count", m.backup_count},
    {"infeasible_count", m.infeasible_count},
    {"warnings", m.warnings},
  };
}

/// Plain-text table for the terminal.
inline std::string format_report(const MetricsReport & m)
{
  char buf[160];
  std::string s;
  std::snprintf(buf, sizeof buf, "rows after %.2f s warm-up: %d\n", m.warmup, m.rows_used);
  s += buf;
  s += "            x          y          z\n";
  const auto line = [&](const char * name, const std::array<double, 3> & a) {
    std::snprintf(buf, sizeof buf, "%-9s %10.4f %10.4f %10.4f\n", name, a[0], a[1], a[2]);
    s += buf;
  };
  line("e_p max", m.e_p_max);
  line("e_p rms", m.e_p_rms);
  s += "            roll       pitch      yaw\n";
  line("e_eta max", m.e_eta_max);
  line("e_eta rms", m.e_eta_rms);
  std::snprintf(buf, sizeof buf, "f [N]       %.4f .. %.4f\nfdot [N/s]  %.3f .. %.3f\n", m.f_min, m.f_max, m.fdot_min, m.fdot_max);
  s += buf;
  std::snprintf(buf, sizeof buf, "solve time  mean %.3f ms, max %.3f ms\n", 1e3 * m.solve_time_mean, 1e3 * m.solve_time_max);
  s += buf;
  std::snprintf(buf, sizeof buf, "backups %d, infeasible %d\n", m.backup_count, m.infeasible_count);
  s += buf;
  for (const auto & w : m.warnings) { s += "warning: " + w + "\n"; }
  return s;
}

}  // namespace mrav
