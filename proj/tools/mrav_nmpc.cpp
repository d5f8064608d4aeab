// mrav_nmpc: closed-loop simulation, identification pipelines and metrics.
//
// exit codes: 0 ok, 1 bad input (config, missing file, usage),
// 2 the run itself failed (divergence, identification failure)

#include <mrav/config.hpp>
#include <mrav/csv.hpp>
#include <mrav/metrics.hpp>

#include <CLI11.hpp>

#include <iostream>

namespace {

using namespace mrav;
namespace fs = std::filesystem;
using config::json;

constexpr int kOk = 0;
constexpr int kBadInput = 1;
constexpr int kRunFailed = 2;

struct SimulateArgs
{
  std::string config, out, metrics;
  std::optional<std::uint64_t> seed;
  std::optional<double> rho, duration;
  bool no_timing = false;
  double warmup = 1.0;
};

int simulate(const SimulateArgs & a)
{
  Scenario sc = config::load_scenario(a.config);
  if (a.seed) { sc.seed = *a.seed; }
  if (a.rho) {
    if (!(*a.rho > 0.0)) { throw ConfigError("--rho must be positive"); }
    sc.rho = RhoSchedule{*a.rho, 0.0, *a.rho, 2};
  }
  if (a.duration) {
    if (!(*a.duration > 0.0)) { throw ConfigError("--duration must be positive"); }
    sc.duration = *a.duration;
  }
  SimOptions so;
  so.record_timing = !a.no_timing;
  const SimResult res = run_scenario(sc, so);
  csv::write(a.out, res.log);

  const MetricsReport m = compute_metrics(res.log, a.warmup);
  const auto & s = res.summary;
  json side = to_json(m);
  side["scenario"] = sc.name;
  side["seed"] = sc.seed;
  side["summary"] = {
    {"diverged", s.diverged},
    {"divergence_reason", s.divergence_reason},
    {"steps", s.steps},
    {"backup_steps", s.backup_steps},
    {"infeasible_steps", s.infeasible_steps},
    {"mean_solve_time_s", s.mean_solve_time},
    {"max_solve_time_s", s.max_solve_time},
    {"timing_chain_fraction", s.timing_chain_fraction},
    {"max_input_violation", s.max_input_violation},
    {"max_force_violation_N", s.max_force_violation},
    {"tracking_cost", s.tracking_cost},
    {"energy_cost", s.energy_cost},
    {"input_bound_activity", s.input_bound_activity},
  };
  const std::string sidecar = a.metrics.empty() ? a.out + ".metrics.json" : a.metrics;
  config::write_json(sidecar, side);

  std::cout << sc.name << ": " << s.steps << " steps, " << res.log.rows.size() << " rows -> " << a.out << "\n" << format_report(m);
  std::cout << "tracking cost " << s.tracking_cost << ", energy cost " << s.energy_cost << "\n";
  if (s.diverged) {
    std::cerr << "error: diverged: " << s.divergence_reason << "\n";
    return kRunFailed;
  }
  return kOk;
}

struct LimitsArgs
{
  std::string log, plan, actuator, out;
  double eps_f = 0.2;
  double filter_cutoff = 0.0;
};

int identify_limits(const LimitsArgs & a)
{
  config::PlanConfig pc = config::load_plan(a.plan);
  if (!a.actuator.empty()) {
    json j = {{"actuator", a.actuator}};
    const auto doc = config::parse_text(j.dump(), fs::current_path() / "--actuator");
    pc.actuator = config::actuator_from(config::resolve(config::Node(doc), "actuator", "actuators"));
  }
  if (!pc.actuator) { throw ConfigError(a.plan + ": no actuator given (plan file \"actuator\" key or --actuator)"); }
  if (!(a.eps_f > 0.0)) { throw ConfigError("--eps-f must be positive"); }
  const csv::Table t = csv::read(a.log);
  for (const auto & w : t.warnings) { std::cerr << "warning: " << w << "\n"; }
  const ident::SpeedLog log = csv::speed_log(t);
  ActuatorModel act = *pc.actuator;
  act.accel_table = ident::extract_accel_limits(log, pc.plan, act.speed_lo, act.speed_hi, act.c_f, a.eps_f, a.filter_cutoff);

  json table = config::table_to_json(act.accel_table);
  table["eps_f"] = a.eps_f;
  table["filter_cutoff"] = a.filter_cutoff;
  table["source"] = fs::path(a.log).filename().string();
  const json out = {
    {"c_f", act.c_f}, {"speed_lo", act.speed_lo}, {"speed_hi", act.speed_hi}, {"rho", act.rate_scale}, {"allow_switch_off", act.allow_switch_off},
    {"table", table}};
  config::write_json(a.out, out);
  std::cout << "setpoint [Hz]  accel_lo [Hz/s]  accel_hi [Hz/s]\n";
  for (std::size_t h = 0; h < act.accel_table.speeds.size(); ++h) {
    std::printf("%13g  %15g  %15g\n", act.accel_table.speeds[h], act.accel_table.accel_lo[h], act.accel_table.accel_hi[h]);
  }
  return kOk;
}

struct AllocationArgs
{
  std::string log, model, out;
  double filter_cutoff = 30.0;
};

int identify_allocation(const AllocationArgs & a)
{
  const VehicleModel nominal = config::load_vehicle(a.model);
  const csv::Table t = csv::read(a.log);
  for (const auto & w : t.warnings) { std::cerr << "warning: " << w << "\n"; }
  const ident::FlightLog log = csv::flight_log(t);
  if (log.rotors() != nominal.rotor_count()) {
    throw ConfigError(a.log + ": log has " + std::to_string(log.rotors()) + " rotors, model has " + std::to_string(nominal.rotor_count()));
  }
  const auto r = ident::identify_allocation(log, nominal, a.filter_cutoff);
  const AllocationMatrix g0 = allocation_matrix(nominal, nominal.tiltable() ? std::optional<double>(0.0) : std::nullopt);
  config::write_json(a.out, config::allocation_to_json(r, g0));

  const Mat e = ident::relative_error_percent(g0, r.g);
  std::cout << "identified allocation (condition " << r.condition << ", residual " << r.residual << ")\n";
  for (Eigen::Index i = 0; i < r.g.rows(); ++i) {
    for (Eigen::Index k = 0; k < r.g.cols(); ++k) { std::printf("%10.5f", r.g(i, k)); }
    std::printf("\n");
  }
  std::cout << "relative error vs nominal [%]\n";
  for (Eigen::Index i = 0; i < e.rows(); ++i) {
    for (Eigen::Index k = 0; k < e.cols(); ++k) {
      if (std::isnan(e(i, k))) {
        std::printf("%10s", "-");
      } else {
        std::printf("%10.1f", e(i, k));
      }
    }
    std::printf("\n");
  }
  return kOk;
}

struct MetricsArgs
{
  std::string log, out;
  double warmup = 1.0;
};

int metrics(const MetricsArgs & a)
{
  const csv::Table t = csv::read(a.log);
  MetricsReport m = compute_metrics(csv::to_simlog(t), a.warmup);
  m.warnings.insert(m.warnings.begin(), t.warnings.begin(), t.warnings.end());
  config::write_json(a.out.empty() ? a.log + ".metrics.json" : a.out, to_json(m));
  std::cout << format_report(m);
  return kOk;
}

struct SynthBenchArgs
{
  std::string plan, out;
  double flat_limit = 0.0;
  double noise = 0.0;
  std::uint64_t seed = 1;
};

int synth_bench(const SynthBenchArgs & a)
{
  config::PlanConfig pc = config::load_plan(a.plan);
  double lo = 16.0, hi = 110.0;
  if (pc.actuator) {
    lo = pc.actuator->speed_lo;
    hi = pc.actuator->speed_hi;
  }
  ident::SyntheticMotor motor = ident::setup_two_bench();
  if (a.flat_limit > 0.0) {
    motor.limits.speeds = {0.0, 1000.0};
    motor.limits.accel_lo = {-a.flat_limit, -a.flat_limit};
    motor.limits.accel_hi = {a.flat_limit, a.flat_limit};
  }
  motor.noise_sigma = a.noise;
  motor.seed = a.seed;
  csv::write_speed_log(a.out, motor.run(ident::generate_ramp_plan(pc.plan, lo, hi)));
  return kOk;
}

struct SynthFlightArgs
{
  std::string model, out, truth_out;
  double perturb = 0.0, force_noise = 0.0, duration = 6.0, amplitude = 0.4;
  std::uint64_t seed = 1;
};

int synth_flight(const SynthFlightArgs & a)
{
  const VehicleModel nominal = config::load_vehicle(a.model);
  VehicleModel truth = nominal;
  AllocationMatrix g = allocation_matrix(nominal);
  if (a.perturb > 0.0) {
    std::mt19937_64 rng(a.seed);
    std::uniform_real_distribution<double> u(-a.perturb, a.perturb);
    const double big = g.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < g.size(); ++i) { g(i) += u(rng) * big; }
    truth.set_allocation_override(g);
  }
  ident::FlightExcitation ex;
  ex.duration = a.duration;
  ex.force_noise = a.force_noise;
  ex.amplitude = a.amplitude;
  ex.seed = a.seed;
  csv::write_flight_log(a.out, ident::synthetic_flight(truth, nominal, ex));
  if (!a.truth_out.empty()) {
    std::vector<double> flat;
    for (Eigen::Index i = 0; i < 6; ++i) {
      for (Eigen::Index k = 0; k < g.cols(); ++k) { flat.push_back(g(i, k)); }
    }
    config::write_json(a.truth_out, json{{"rotors", g.cols()}, {"allocation", flat}});
  }
  return kOk;
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"NMPC for multi-rotor aerial vehicles: simulation, identification, metrics"};
  app.require_subcommand(1);

  SimulateArgs sa;
  auto * sim = app.add_subcommand("simulate", "run a scenario and write the SimLog CSV plus a metrics sidecar");
  sim->add_option("--config", sa.config, "scenario JSON")->required();
  sim->add_option("--out", sa.out, "SimLog CSV")->required();
  sim->add_option("--metrics", sa.metrics, "sidecar path (default <out>.metrics.json)");
  sim->add_option("--seed", sa.seed, "overrides the scenario seed");
  sim->add_option("--rho", sa.rho, "constant rate-bound multiplier, replaces the scenario's schedule");
  sim->add_option("--duration", sa.duration, "overrides the scenario duration [s]");
  sim->add_flag("--no-timing", sa.no_timing, "write 0 for solve times so logs are reproducible byte for byte");
  sim->add_option("--warmup", sa.warmup, "metrics warm-up window [s]")->capture_default_str();

  LimitsArgs la;
  auto * lim = app.add_subcommand("identify-limits", "acceleration limits from a ramp bench log (t,w_des,w_meas)");
  lim->add_option("--log", la.log, "bench CSV")->required();
  lim->add_option("--plan", la.plan, "ramp plan JSON")->required();
  lim->add_option("--actuator", la.actuator, "actuator preset or file giving c_f and the speed range");
  lim->add_option("--eps-f", la.eps_f, "force-error threshold [N]")->capture_default_str();
  lim->add_option("--filter-cutoff", la.filter_cutoff, "zero-phase low-pass on the measured speed [rad/s], 0 disables")
    ->capture_default_str();
  lim->add_option("--out", la.out, "actuator JSON with the identified table")->required();

  AllocationArgs aa;
  auto * alloc = app.add_subcommand("identify-allocation", "allocation matrix from a flight log (t,px,py,pz,r11..r33,w1..wn)");
  alloc->add_option("--log", aa.log, "flight CSV")->required();
  alloc->add_option("--model", aa.model, "nominal vehicle JSON")->required();
  alloc->add_option("--filter-cutoff", aa.filter_cutoff, "zero-phase low-pass [rad/s], 0 disables")->capture_default_str();
  alloc->add_option("--out", aa.out, "allocation JSON")->required();

  MetricsArgs ma;
  auto * met = app.add_subcommand("metrics", "tracking and actuation report for a SimLog CSV");
  met->add_option("--log,log", ma.log, "SimLog CSV")->required();
  met->add_option("--out", ma.out, "JSON report (default <log>.metrics.json)");
  met->add_option("--warmup", ma.warmup, "rows with t below this are left out [s]")->capture_default_str();

  SynthBenchArgs sb;
  auto * bench = app.add_subcommand("synth-bench", "bench log from a synthetic motor, for trying identify-limits");
  bench->add_option("--plan", sb.plan, "ramp plan JSON")->required();
  bench->add_option("--out", sb.out, "bench CSV")->required();
  bench->add_option("--flat-limit", sb.flat_limit, "constant +-limit [Hz/s] instead of the built-in asymmetric motor");
  bench->add_option("--noise", sb.noise, "speed measurement noise [Hz]");
  bench->add_option("--seed", sb.seed)->capture_default_str();

  SynthFlightArgs sf;
  auto * flight = app.add_subcommand("synth-flight", "flight log of a stabilized multisine flight, for trying identify-allocation");
  flight->add_option("--model", sf.model, "vehicle JSON")->required();
  flight->add_option("--out", sf.out, "flight CSV")->required();
  flight->add_option("--perturb", sf.perturb, "relative perturbation of the true allocation matrix");
  flight->add_option("--truth-out", sf.truth_out, "write the true allocation here");
  flight->add_option("--force-noise", sf.force_noise, "multiplicative rotor force noise");
  flight->add_option("--amplitude", sf.amplitude, "multisine amplitude per rotor [N], 0 gives hover only")->capture_default_str();
  flight->add_option("--duration", sf.duration)->capture_default_str();
  flight->add_option("--seed", sf.seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError & e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kBadInput;
  }

  try {
    if (*sim) { return simulate(sa); }
    if (*lim) { return identify_limits(la); }
    if (*alloc) { return identify_allocation(aa); }
    if (*met) { return metrics(ma); }
    if (*bench) { return synth_bench(sb); }
    if (*flight) { return synth_flight(sf); }
  } catch (const ConfigError & e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadInput;
  } catch (const IdentificationError & e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRunFailed;
  } catch (const DomainError & e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRunFailed;
  }
  return kBadInput;
}
