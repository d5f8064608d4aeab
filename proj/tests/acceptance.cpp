// Acceptance run: one PASS/FAIL line per criterion.
// Usage: acceptance [criterion ...]   (default: all)

#include <mrav/config.hpp>
#include <mrav/csv.hpp>
#include <mrav/identification.hpp>
#include <mrav/metrics.hpp>
#include <mrav/scenarios.hpp>

#include "oracles.hpp"

#include <chrono>
#include <cstdio>
#include <map>
#include <set>

namespace fs = std::filesystem;
using namespace mrav;

namespace {

struct Run
{
  Scenario scenario;
  SimResult first, second;
  double wall = 0.0;  // seconds, first run
};

std::map<std::string, Run> g_runs;

// every shipped scenario, run twice with timing zeroed
const std::map<std::string, Run> & shipped_runs()
{
  if (!g_runs.empty()) { return g_runs; }
  std::vector<fs::path> files;
  for (const auto & e : fs::directory_iterator(config::preset_dir() / "scenarios")) {
    if (e.path().extension() == ".json") { files.push_back(e.path()); }
  }
  std::sort(files.begin(), files.end());
  for (const auto & f : files) {
    Run r;
    r.scenario = config::load_scenario(f);
    const auto t0 = std::chrono::steady_clock::now();
    r.first = run_scenario(r.scenario, {false});
    r.wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    r.second = run_scenario(r.scenario, {false});
    std::fprintf(stderr, "  ran %-26s %6.1f s wall\n", f.stem().c_str(), r.wall);
    g_runs.emplace(f.stem().string(), std::move(r));
  }
  return g_runs;
}

const Run & shipped(const std::string & name)
{
  const auto & runs = shipped_runs();
  const auto it = runs.find(name);
  if (it == runs.end()) { throw ConfigError("missing shipped scenario " + name); }
  return it->second;
}

struct Verdict
{
  bool pass = false;
  std::string detail;
};

std::string fmt(const char * f, auto... args)
{
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double col_at(const SimLog & log, std::size_t k, const std::string & name) { return log.rows[k][static_cast<std::size_t>(log.column(name))]; }

Vec3 pos_err(const SimLog & log, std::size_t k)
{
  return Vec3(col_at(log, k, "p_x") - col_at(log, k, "pr_x"), col_at(log, k, "p_y") - col_at(log, k, "pr_y"),
              col_at(log, k, "p_z") - col_at(log, k, "pr_z"));
}

Vec3 eta_err(const SimLog & log, std::size_t k)
{
  return Vec3(wrap_angle(col_at(log, k, "roll") - col_at(log, k, "etar_roll")), wrap_angle(col_at(log, k, "pitch") - col_at(log, k, "etar_pitch")),
              wrap_angle(col_at(log, k, "yaw") - col_at(log, k, "etar_yaw")));
}

Verdict horizon_shape()
{
  const Scenario tilthex = config::load_scenario(config::preset_dir() / "scenarios/tilthex_chirp.json");
  const OcpProblem p = assemble(tilthex.vehicle, tilthex.actuator, tilthex.weights, tilthex.reference, initial_state(tilthex), 0.0, tilthex.horizon);
  bool ok = p.horizon_steps == 10 && p.node_count() == 11 && p.step == 0.1 && p.horizon_time() == 1.0 && p.y_ref.size() == 11
            && p.u_lo.size() == 10 && p.u_hi.size() == 10 && p.x0.size() == 18 && p.q_stage.size() == 18 && p.r_input.size() == 6;
  try {
    p.validate(18, 6, 18);
  } catch (const std::exception &) {
    ok = false;
  }
  return {ok, fmt("nodes %d, T = %g s, t_H = %g s, x %d, u %d, y %d", p.node_count(), p.step, p.horizon_time(), static_cast<int>(p.x0.size()),
                  static_cast<int>(p.r_input.size()), static_cast<int>(p.q_stage.size()))};
}

Verdict solver_speed()
{
  const Scenario sc = config::load_scenario(config::preset_dir() / "scenarios/tilthex_chirp.json");
  const SimResult r = run_scenario(sc, {true});
  const auto & s = r.summary;
  const bool chain = sc.t_ctrl <= sc.horizon.step && sc.horizon.step <= sc.horizon.step * sc.horizon.horizon_steps;
  const bool ok = !s.diverged && s.mean_solve_time <= 0.010 && s.timing_chain_fraction >= 0.99 && chain;
  return {ok, fmt("mean t_solv %.2f ms (max %.2f ms), t_solv <= T_ctrl on %.2f%% of %d steps", 1e3 * s.mean_solve_time, 1e3 * s.max_solve_time,
                  100.0 * s.timing_chain_fraction, s.steps)};
}

Verdict fasthex_disturbance()
{
  const Run & r = shipped("fasthex_hover");
  const SimLog & log = r.first.log;
  const auto & d = r.scenario.disturbance;
  double p_peak = 0.0, eta_peak = 0.0;
  for (std::size_t k = 0; k < log.rows.size(); ++k) {
    p_peak = std::max(p_peak, pos_err(log, k).norm());
    const double t = log.rows[k][0];
    if (t >= d.t1 && t <= 2.0 * d.t2 - d.t1) { eta_peak = std::max(eta_peak, eta_err(log, k).cwiseAbs().maxCoeff() * kRadToDeg); }
  }
  const bool ok = !r.first.summary.diverged && p_peak < 0.12 && eta_peak < 2.0 && r.wall < 300.0;
  return {ok, fmt("peak |e_p| %.2f cm, peak |e_eta| %.2f deg during push, %.0f s sim in %.1f s", 100.0 * p_peak, eta_peak, r.scenario.duration, r.wall)};
}

Verdict variable_tilt_cost()
{
  const auto cost = [](const Run & r) { return r.first.summary.tracking_cost + r.first.summary.energy_cost; };
  const Run & var = shipped("fasthex_hover");
  bool ok = !var.first.summary.diverged;
  std::string detail = fmt("variable %.4f", cost(var));
  for (const char * name : {"fasthex_fixed_0", "fasthex_fixed_10", "fasthex_fixed_20"}) {
    const Run & f = shipped(name);
    ok = ok && f.scenario.seed == var.scenario.seed && cost(var) < cost(f);
    detail += fmt(", %s %.4f", name + 8, cost(f));
  }
  return {ok, detail};
}

struct FailureStats
{
  double ep_window_max = 0.0;  // largest 1 s window-mean position error norm in [20, 30]
  Vec3 eta_band = Vec3::Zero();  // max - min of 1 s window-mean orientation in [20, 30], deg
  double p_peak = 0.0;  // largest per-axis deviation from the mean, t >= 10, m
  double eta_peak = 0.0;  // same for orientation, deg
  double rotor_off_share = 0.0;  // samples with f3 < 0.1 N
  bool diverged = true;
};

FailureStats failure_stats(const SimResult & r)
{
  FailureStats s;
  s.diverged = r.summary.diverged;
  const SimLog & log = r.log;
  if (log.rows.empty()) { return s; }
  const int f3 = log.column("f3");
  std::vector<Vec3> ep_sum(10, Vec3::Zero()), eta_sum(10, Vec3::Zero());
  std::vector<int> cnt(10, 0);
  Vec3 p_mean = Vec3::Zero(), eta_mean = Vec3::Zero();
  int late = 0, off = 0;
  for (std::size_t k = 0; k < log.rows.size(); ++k) {
    const double t = log.rows[k][0];
    if (log.rows[k][static_cast<std::size_t>(f3)] < 0.1) { ++off; }
    if (t >= 10.0) {
      p_mean += pos_err(log, k);
      eta_mean += eta_err(log, k);
      ++late;
    }
    if (t >= 20.0) {
      const auto w = std::min(9, static_cast<int>(std::floor(t - 20.0)));
      ep_sum[w] += pos_err(log, k);
      eta_sum[w] += eta_err(log, k);
      ++cnt[w];
    }
  }
  s.rotor_off_share = static_cast<double>(off) / static_cast<double>(log.rows.size());
  if (late == 0 || cnt[9] == 0) { return s; }
  p_mean /= late;
  eta_mean /= late;
  for (std::size_t k = 0; k < log.rows.size(); ++k) {
    if (log.rows[k][0] < 10.0) { continue; }
    s.p_peak = std::max(s.p_peak, (pos_err(log, k) - p_mean).cwiseAbs().maxCoeff());
    s.eta_peak = std::max(s.eta_peak, (eta_err(log, k) - eta_mean).cwiseAbs().maxCoeff() * kRadToDeg);
  }
  Vec3 lo = Vec3::Constant(1e9), hi = Vec3::Constant(-1e9);
  for (int w = 0; w < 10; ++w) {
    const Vec3 e = ep_sum[w] / cnt[w];
    const Vec3 a = eta_sum[w] / cnt[w] * kRadToDeg;
    s.ep_window_max = std::max(s.ep_window_max, e.norm());
    lo = lo.cwiseMin(a);
    hi = hi.cwiseMax(a);
  }
  s.eta_band = hi - lo;
  return s;
}

Verdict failed_tilthex()
{
  const FailureStats tilted = failure_stats(shipped("tilthex_failure_beta-25").first);
  const FailureStats flat = failure_stats(shipped("tilthex_failure_beta0").first);
  const bool hover = !tilted.diverged && tilted.ep_window_max < 0.02 && tilted.eta_band.maxCoeff() < 0.5;
  const bool oscillates = !flat.diverged && flat.eta_band.maxCoeff() > 0.5 && flat.p_peak >= 0.01 && flat.p_peak <= 0.04 && flat.eta_peak >= 3.75
                          && flat.eta_peak <= 15.0;
  const bool off = tilted.rotor_off_share >= 0.95 && flat.rotor_off_share >= 0.95;
  return {hover && oscillates && off,
          fmt("beta -25: |e_p| %.2f cm, eta band %.2f deg; beta 0: band %.2f deg, peaks %.2f cm / %.2f deg; f3 < 0.1 N on %.1f%% / %.1f%%",
              100.0 * tilted.ep_window_max, tilted.eta_band.maxCoeff(), flat.eta_band.maxCoeff(), 100.0 * flat.p_peak, flat.eta_peak,
              100.0 * tilted.rotor_off_share, 100.0 * flat.rotor_off_share)};
}

Verdict constraint_compliance()
{
  double u_worst = 0.0, f_worst = 0.0;
  bool ok = true;
  std::string bad;
  for (const auto & [name, r] : shipped_runs()) {
    const auto & s = r.first.summary;
    u_worst = std::max(u_worst, s.max_input_violation);
    f_worst = std::max(f_worst, s.max_force_violation);
    if (s.diverged || s.max_input_violation > 0.0 || s.max_force_violation > 1e-6) {
      ok = false;
      bad += " " + name;
    }
  }
  const bool active = shipped("quadrotor_steps").first.summary.input_bound_activity;
  return {ok && active, fmt("%zu scenarios, worst input violation %.3g, worst force violation %.3g N, step input-bound activity %s%s%s",
                            shipped_runs().size(), u_worst, f_worst, active ? "yes" : "no", bad.empty() ? "" : ", failing:", bad.c_str())};
}

Verdict oracles()
{
  const double qp = oracle::qp_vs_enumeration(100, 12345);
  const double rti = oracle::rti_vs_batch(21);
  const double sens = oracle::sensitivities_vs_fd(100, 11);
  return {qp < 1e-8 && rti < 1e-8 && sens < 1e-4, fmt("QP vs KKT enumeration %.2g, RTI vs batch LS %.2g, sensitivities vs FD %.2g", qp, rti, sens)};
}

Verdict identification()
{
  using namespace ident;
  RampPlan plan = RampPlan::grid(30, 90, 10, 10, 20, 300, 10);
  plan.rest = 0.2;
  SyntheticMotor motor;
  motor.limits.speeds = {0, 200};
  motor.limits.accel_lo = {-150.0, -150.0};
  motor.limits.accel_hi = {150.0, 150.0};
  const auto t = extract_accel_limits(motor.run(generate_ramp_plan(plan, 16, 102)), plan, 16, 102, 9.9e-4, synthetic_eps(9.9e-4), 300.0);
  double slope_err = 0.0;
  for (std::size_t h = 0; h < t.speeds.size(); ++h) {
    slope_err = std::max({slope_err, std::abs(t.accel_hi[h] - 150.0), std::abs(t.accel_lo[h] + 150.0)});
  }

  auto truth = presets::tilthex();
  AllocationMatrix g = allocation_matrix(truth);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  const double scale = g.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < g.size(); ++i) { g(i) += u(rng) * scale; }
  truth.set_allocation_override(g);
  const auto r = identify_allocation(synthetic_flight(truth, presets::tilthex(), {}), presets::tilthex(), 0.0);
  const double rel = (r.g - g).norm() / g.norm();
  return {t.speeds.size() == 7 && slope_err <= 10.0 && rel < 1e-6,
          fmt("rate limits within %.0f Hz/s over %zu setpoints, allocation relative error %.2g", slope_err, t.speeds.size(), rel)};
}

Verdict chirp()
{
  const Scenario sc = config::load_scenario(config::preset_dir() / "scenarios/quadrotor_chirp.json");
  const Reference & r = sc.reference;
  const double xi = r.chirp_frequency(scenarios::kChirpTbar - 1e-9);
  double peak = 0.0;
  for (double t = 0.0; t < sc.duration; t += 1e-3) { peak = std::max(peak, std::abs(r.chirp_signal(t)(2))); }
  return {std::abs(xi - 1.121) < 5e-4 && peak >= 5.5 && peak <= 6.2, fmt("xi(t_bar) = %.4f rad/s, peak acceleration %.3f m/s^2", xi, peak)};
}

Verdict udt_mdt()
{
  const double quad = compute_metrics(shipped("quadrotor_chirp").first.log).e_eta_rms[1];
  const double hex = compute_metrics(shipped("tilthex_chirp").first.log).e_eta_rms[1];
  return {quad >= 2.0 * hex && hex > 0.0, fmt("pitch RMS quadrotor %.2f deg, Tilt-Hex %.2f deg, ratio %.1f", quad, hex, quad / hex)};
}

Verdict determinism()
{
  std::string bad;
  for (const auto & [name, r] : shipped_runs()) {
    if (csv::to_string(r.first.log.columns, r.first.log.rows) != csv::to_string(r.second.log.columns, r.second.log.rows)) { bad += " " + name; }
  }
  return {bad.empty(), fmt("%zu scenarios re-run with the same seed%s%s", shipped_runs().size(), bad.empty() ? ", logs byte-identical" : ", differing:",
                           bad.c_str())};
}

}  // namespace

int main(int argc, char ** argv)
{
  const std::vector<std::pair<const char *, Verdict (*)()>> criteria = {
    {"horizon shape", horizon_shape},
    {"solver speed", solver_speed},
    {"FAST-Hex disturbance", fasthex_disturbance},
    {"variable tilt cost", variable_tilt_cost},
    {"failed Tilt-Hex", failed_tilthex},
    {"constraint compliance", constraint_compliance},
    {"oracles", oracles},
    {"identification", identification},
    {"chirp reference", chirp},
    {"UDT vs MDT pitch", udt_mdt},
    {"determinism", determinism},
  };
  std::set<int> pick;
  for (int i = 1; i < argc; ++i) { pick.insert(std::atoi(argv[i])); }

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!pick.empty() && !pick.count(id)) { continue; }
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception & e) {
      v = {false, std::string("error: ") + e.what()};
    }
    if (!v.pass) { ++failed; }
    std::printf("criterion %2d %-22s %s  %s\n", id, criteria[i].first, v.pass ? "PASS" : "FAIL", v.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
