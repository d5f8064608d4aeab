#pragma once

// Closed-loop simulation: plant at a fine step, filtered sensor noise,
// external disturbances, and the NMPC loop at T_ctrl.

#include "mrav_model.hpp"
#include "ocp.hpp"
#include "rti.hpp"

#include <cstdint>
#include <random>
#include <string>

namespace mrav {

struct NoiseSpec
{
  /// stationary: sigma is the standard deviation of the filtered noise.
  /// white: sigma is that of the white samples entering a unit-gain filter.
  enum class Convention { stationary, white };

  Vec3 sigma_p = Vec3::Zero();      // m
  Vec3 sigma_v = Vec3::Zero();      // m/s
  Vec3 sigma_eta = Vec3::Zero();    // rad
  Vec3 sigma_omega = Vec3::Zero();  // rad/s
  double cutoff = 25.0;             // rad/s
  Convention convention = Convention::stationary;

  bool enabled() const
  {
    return (sigma_p.array() > 0).any() || (sigma_v.array() > 0).any() || (sigma_eta.array() > 0).any()
           || (sigma_omega.array() > 0).any();
  }
  void validate() const
  {
    if ((sigma_p.array() < 0).any() || (sigma_v.array() < 0).any() || (sigma_eta.array() < 0).any()
        || (sigma_omega.array() < 0).any()) {
      throw ConfigError("noise sigmas must be nonnegative");
    }
    if (!(cutoff > 0.0)) { throw ConfigError("noise cutoff must be positive"); }
  }
};

/**
 * @brief White Gaussian samples through a first-order low-pass, 12 channels
 * (p, v, eta, omega), one sample per dt.
 *
 * Discrete pole a = exp(-cutoff dt). Stationary convention: input gain
 * sqrt(1 - a^2), so the output deviation is sigma. White convention: input
 * gain 1 - a (unit DC gain), output deviation sigma sqrt((1 - a) / (1 + a)).
 * Starts from the stationary law.
 */
class NoiseGenerator
{
public:
  NoiseGenerator(const NoiseSpec & spec, double dt, std::uint64_t seed) : rng_(seed)
  {
    spec.validate();
    if (!(dt > 0.0)) { throw ConfigError("noise sample time must be positive"); }
    sigma_ << spec.sigma_p, spec.sigma_v, spec.sigma_eta, spec.sigma_omega;
    a_ = std::exp(-spec.cutoff * dt);
    b_ = spec.convention == NoiseSpec::Convention::stationary ? std::sqrt(1.0 - a_ * a_) : 1.0 - a_;
    const double out = b_ / std::sqrt(1.0 - a_ * a_);
    state_.resize(12);
    for (int i = 0; i < 12; ++i) { state_(i) = out * sigma_(i) * draw(); }
  }

  const Vec & next()
  {
    for (int i = 0; i < 12; ++i) { state_(i) = a_ * state_(i) + b_ * sigma_(i) * draw(); }
    return state_;
  }
  const Vec & current() const { return state_; }
  double pole() const { return a_; }

private:
  double draw() { return normal_(rng_); }

  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  Eigen::Matrix<double, 12, 1> sigma_;
  double a_ = 0.0, b_ = 0.0;
  Vec state_;
};

struct Disturbance
{
  enum class Kind { none, triangular_force, constant_body_torque };
  Kind kind = Kind::none;
  Vec3 direction = Vec3::UnitX();  // world frame, normalized on use
  double peak = 0.0;               // N
  double t1 = 0.0, t2 = 1.0;       // rises on [t1, t2], falls back to zero at 2 t2 - t1
  Vec3 torque = Vec3::Zero();      // body frame, N m
  double t_on = 0.0;

  void validate() const
  {
    if (kind == Kind::triangular_force) {
      if (peak < 0.0 || !(t1 < t2)) { throw ConfigError("triangular force needs peak >= 0 and t1 < t2"); }
      if (!(direction.norm() > 0.0)) { throw ConfigError("triangular force needs a direction"); }
    }
  }

  ExternalWrench at(double t) const
  {
    ExternalWrench w;
    if (kind == Kind::triangular_force) {
      const double up = (t - t1) / (t2 - t1);
      const double s = t < t1 ? 0.0 : (t <= t2 ? up : std::max(0.0, 2.0 - up));
      w.force_world = peak * s * direction.normalized();
    } else if (kind == Kind::constant_body_torque && t >= t_on) {
      w.torque_body = torque;
    }
    return w;
  }
};

/// One plant step; the disturbance wrench enters the Newton-Euler right-hand side.
inline Vec plant_step(const VehicleModel & model, const Vec & x, const Vec & u, double dt, const ExternalWrench & ext = {})
{
  return rk4_step(model, x, u, dt, ext);
}

/**
 * @brief Torque direction that the failed vehicle cannot produce with rotor
 * @p off switched off: normal to the span of the remaining torque columns,
 * signed to agree with the off rotor's own torque column, times @p scale.
 */
inline Vec3 worst_case_torque(const VehicleModel & failed, int off, double scale)
{
  const int n = failed.rotor_count();
  if (off < 0 || off >= n) { throw ConfigError("off rotor index out of range"); }
  const AllocationMatrix g = allocation_matrix(failed, failed.tiltable() ? std::optional<double>(0.0) : std::nullopt);
  Mat g2(3, n - 1);
  for (int i = 0, c = 0; i < n; ++i) {
    if (i != off) { g2.col(c++) = g.block<3, 1>(3, i); }
  }
  Eigen::JacobiSVD<Mat> svd(g2, Eigen::ComputeFullU);
  const auto & s = svd.singularValues();
  int rank = 0;
  for (int i = 0; i < s.size(); ++i) {
    if (s(i) > 1e-9 * s(0)) { ++rank; }
  }
  if (rank != 2) {
    throw ConfigError(
      "reduced torque block has rank " + std::to_string(rank) + ", no unreachable direction; give the disturbance torque explicitly");
  }
  const Vec3 v1 = svd.matrixU().col(0), v2 = svd.matrixU().col(1);
  Vec3 v3 = v1.cross(v2);
  if (v3.dot(g.block<3, 1>(3, off)) < 0.0) { v3 = -v3; }
  return scale * v3;
}

/// Rate-bound multiplier rho: start, raised by step after every `every` step transitions.
struct RhoSchedule
{
  double start = 1.0;
  double step = 0.0;
  double max = 1.0;
  int every = 2;

  double at(const Reference & ref, double t) const
  {
    if (step == 0.0 || ref.kind() != Reference::Kind::step) { return start; }
    const long transitions = static_cast<long>(std::floor(t / ref.period()));
    return std::min(max, start + step * static_cast<double>(transitions / every));
  }
};

struct Scenario
{
  std::string name = "scenario";
  VehicleModel vehicle;
  ActuatorModel actuator;
  Weights weights;
  Reference reference = Reference::hover(Vec3::Zero());
  AssemblyOptions horizon;
  RtiOptions rti;
  double t_ctrl = 0.005;
  double dt_plant = 0.001;
  double duration = 10.0;
  RhoSchedule rho;
  Disturbance disturbance;
  NoiseSpec noise;
  std::uint64_t seed = 1;
  Vec3 initial_eta = Vec3::Zero();
  std::optional<double> fixed_tilt;  // tiltable vehicles: freeze alpha at this angle
  double initial_tilt = 0.0;
  double abort_radius = 5.0;
  double deadline = std::numeric_limits<double>::infinity();
  double mass_factor = 1.0, inertia_factor = 1.0, c_f_factor = 1.0;  // plant / controller
  bool velocity_estimator = false;
  int estimator_window = 5;

  void validate() const
  {
    actuator.validate();
    weights.validate();
    noise.validate();
    disturbance.validate();
    if (!(t_ctrl > 0.0) || !(dt_plant > 0.0) || dt_plant > t_ctrl) { throw ConfigError("need 0 < dt_plant <= t_ctrl"); }
    const double r = t_ctrl / dt_plant;
    if (std::abs(r - std::round(r)) > 1e-9) { throw ConfigError("t_ctrl must be a multiple of dt_plant"); }
    if (t_ctrl > horizon.step) { throw ConfigError("t_ctrl must not exceed the shooting step"); }
    if (!(duration > 0.0)) { throw ConfigError("duration must be positive"); }
    if (!(mass_factor > 0.0 && inertia_factor > 0.0 && c_f_factor > 0.0)) { throw ConfigError("mismatch factors must be positive"); }
    if (fixed_tilt && !vehicle.tiltable()) { throw ConfigError("fixed tilt given for a vehicle without tilt"); }
    if (estimator_window < 2) { throw ConfigError("estimator window must be at least 2"); }
  }
};

/// Column-major numeric log with a fixed header.
struct SimLog
{
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  int column(const std::string & name) const
  {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (columns[i] == name) { return static_cast<int>(i); }
    }
    return -1;
  }
};

struct SimSummary
{
  bool diverged = false;
  std::string divergence_reason;
  int steps = 0;
  int backup_steps = 0;
  int infeasible_steps = 0;
  double mean_solve_time = 0.0;
  double max_solve_time = 0.0;
  double timing_chain_fraction = 0.0;  // share of steps with t_solv <= T_ctrl
  double max_input_violation = 0.0;    // of the applied input w.r.t. the frozen bounds
  double max_force_violation = 0.0;    // of the true forces w.r.t. [f_lo, f_hi]
  double tracking_cost = 0.0;          // integral of the stage cost without the energy term
  double energy_cost = 0.0;
  bool input_bound_activity = false;  // some u_i within 1% of its bound
};

struct SimResult
{
  SimLog log;
  SimSummary summary;
};

struct SimOptions
{
  bool record_timing = true;  // false zeroes the solve-time column and summary timings so outputs are reproducible
};

inline std::vector<std::string> log_columns(const VehicleModel & v)
{
  const int n = v.rotor_count();
  const int nu = v.layout().input_dim();
  std::vector<std::string> c = {"t", "rho"};
  for (const char * s : {"pr_x", "pr_y", "pr_z", "etar_roll", "etar_pitch", "etar_yaw"}) { c.push_back(s); }
  for (const char * s : {"p_x", "p_y", "p_z", "v_x", "v_y", "v_z", "roll", "pitch", "yaw", "w_x", "w_y", "w_z"}) { c.push_back(s); }
  for (int i = 1; i <= n; ++i) { c.push_back("f" + std::to_string(i)); }
  if (v.tiltable()) { c.push_back("alpha"); }
  for (const char * s : {"pm_x", "pm_y", "pm_z", "rollm", "pitchm", "yawm"}) { c.push_back(s); }
  for (int i = 1; i <= nu; ++i) { c.push_back("u" + std::to_string(i)); }
  for (int i = 1; i <= nu; ++i) { c.push_back("ulo" + std::to_string(i)); }
  for (int i = 1; i <= nu; ++i) { c.push_back("uhi" + std::to_string(i)); }
  for (const char * s : {"f_lo", "f_hi", "fd_x", "fd_y", "fd_z", "td_x", "td_y", "td_z", "status", "qp_iter", "active", "slack_max",
                         "solve_time", "cost_track", "cost_energy"}) {
    c.push_back(s);
  }
  return c;
}

inline Vec initial_state(const Scenario & sc)
{
  const auto l = sc.vehicle.layout();
  Vec x = Vec::Zero(l.state_dim());
  x.segment<3>(StateLayout::kPos) = sc.reference.sample(0.0).p;
  x.segment<3>(StateLayout::kEta) = sc.initial_eta;
  std::optional<double> tilt;
  if (l.tilt) {
    tilt = sc.fixed_tilt.value_or(sc.initial_tilt);
    x(l.tilt_index()) = *tilt;
  }
  const auto fb = force_bounds(sc.actuator);
  x.segment(StateLayout::kForces, l.rotors) = hover_forces(sc.vehicle, tilt).cwiseMax(fb.first).cwiseMin(fb.second);
  return x;
}

/// Runs the closed loop; never throws on divergence, which is reported in the summary.
inline SimResult run_scenario(const Scenario & sc, const SimOptions & so = {})
{
  sc.validate();
  const VehicleModel & ctrl_model = sc.vehicle;
  const VehicleModel plant = ctrl_model.scaled(sc.mass_factor, sc.inertia_factor);
  const auto l = ctrl_model.layout();
  const int n = l.rotors, nu = l.input_dim();

  VehicleModel model_for_solver = ctrl_model;
  if (sc.fixed_tilt) {
    TiltLimits tl = ctrl_model.tilt_limits();
    tl.rate_lo = tl.rate_hi = 0.0;
    model_for_solver.set_tilt_limits(tl);
  }

  RtiOptions ro = sc.rti;
  ro.shift_fraction = sc.t_ctrl / sc.horizon.step;
  RtiSolver<MravModel> solver(MravModel(model_for_solver, sc.horizon.energy_output), ro);

  Reference ref = sc.reference;
  if (sc.horizon.energy_output) { ref.set_energy(hover_energy(ctrl_model)); }

  // noise runs at the plant rate and is read once per control step
  NoiseGenerator noise(sc.noise, sc.dt_plant, sc.seed);
  const bool noisy = sc.noise.enabled();

  SimResult res;
  res.log.columns = log_columns(ctrl_model);
  const int substeps = static_cast<int>(std::lround(sc.t_ctrl / sc.dt_plant));
  const long steps = static_cast<long>(std::floor(sc.duration / sc.t_ctrl + 1e-9));
  const auto fb = force_bounds(sc.actuator);
  const Vec qvec = sc.weights.stage.to_vector(sc.horizon.energy_output);

  Vec x = initial_state(sc);
  std::vector<Vec3> pos_hist;
  double time_sum = 0.0;
  long chain_ok = 0;
  auto & s = res.summary;

  for (long k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * sc.t_ctrl;
    const ReferenceSample rs = ref.sample(t);

    // measurement
    Vec xm = x;
    if (noisy) {
      const Vec & w = noise.current();
      xm.segment<3>(StateLayout::kPos) += w.segment<3>(0);
      xm.segment<3>(StateLayout::kVel) += w.segment<3>(3);
      xm.segment<3>(StateLayout::kEta) += w.segment<3>(6);
      xm.segment<3>(StateLayout::kOmega) += w.segment<3>(9);
    }
    for (int i = 0; i < n; ++i) {
      // rotor speed as the ESC would report it, mapped back with the controller's c_f
      const double f_true = std::max(0.0, x(StateLayout::kForces + i));
      const double speed = std::sqrt(f_true / (sc.actuator.c_f * sc.c_f_factor));
      xm(StateLayout::kForces + i) = thrust_from_speed(sc.actuator, speed);
    }
    if (sc.velocity_estimator) {
      pos_hist.push_back(xm.segment<3>(StateLayout::kPos));
      if (static_cast<int>(pos_hist.size()) > sc.estimator_window) { pos_hist.erase(pos_hist.begin()); }
      const int m = static_cast<int>(pos_hist.size());
      if (m >= 2) {
        // least-squares slope over the window
        const double tc = 0.5 * (m - 1);
        double den = 0.0;
        Vec3 num = Vec3::Zero();
        for (int i = 0; i < m; ++i) {
          den += (i - tc) * (i - tc);
          num += (i - tc) * pos_hist[static_cast<std::size_t>(i)];
        }
        xm.segment<3>(StateLayout::kVel) = num / (den * sc.t_ctrl);
      }
    }

    ActuatorModel act = sc.actuator;
    act.rate_scale = sc.actuator.rate_scale * sc.rho.at(ref, t);
    AssemblyOptions ao = sc.horizon;
    const OcpProblem prob = assemble(model_for_solver, act, sc.weights, ref, xm, t, ao);

    OcpSolution sol;
    try {
      sol = solver.solve_step(prob, sc.deadline);
    } catch (const std::exception & e) {
      s.diverged = true;
      s.divergence_reason = std::string("solver: ") + e.what();
      break;
    }
    const Vec u = sol.applied_input;
    time_sum += sol.solve_time;
    s.max_solve_time = std::max(s.max_solve_time, sol.solve_time);
    if (sol.solve_time <= sc.t_ctrl) { ++chain_ok; }
    if (sol.status == SolveStatus::backup_used) { ++s.backup_steps; }
    if (sol.status == SolveStatus::infeasible) { ++s.infeasible_steps; }
    for (int i = 0; i < nu; ++i) {
      s.max_input_violation = std::max({s.max_input_violation, prob.u_lo[0](i) - u(i), u(i) - prob.u_hi[0](i)});
      const double span = prob.u_hi[0](i) - prob.u_lo[0](i);
      if (i < n && span > 0.0 && (u(i) - prob.u_lo[0](i) < 0.01 * span || prob.u_hi[0](i) - u(i) < 0.01 * span)) {
        s.input_bound_activity = true;
      }
    }

    // stage cost on the true state
    const Vec y = output_vector(ctrl_model, x, u, sc.horizon.energy_output);
    const Vec e = y - rs.to_output(sc.horizon.energy_output);
    double track = 0.0;
    for (int j = 0; j < 18; ++j) { track += qvec(j) * e(j) * e(j); }
    const double energy = sc.horizon.energy_output ? qvec(18) * e(18) * e(18) : 0.0;
    s.tracking_cost += track * sc.t_ctrl;
    s.energy_cost += energy * sc.t_ctrl;

    const ExternalWrench dist = sc.disturbance.at(t);
    std::vector<double> row;
    row.reserve(res.log.columns.size());
    row.push_back(t);
    row.push_back(act.rate_scale);
    for (int i = 0; i < 3; ++i) { row.push_back(rs.p(i)); }
    for (int i = 0; i < 3; ++i) { row.push_back(rs.eta(i)); }
    for (int i = 0; i < 12; ++i) { row.push_back(x(i)); }
    for (int i = 0; i < n; ++i) { row.push_back(x(StateLayout::kForces + i)); }
    if (l.tilt) { row.push_back(x(l.tilt_index())); }
    for (int i = 0; i < 3; ++i) { row.push_back(xm(StateLayout::kPos + i)); }
    for (int i = 0; i < 3; ++i) { row.push_back(xm(StateLayout::kEta + i)); }
    for (int i = 0; i < nu; ++i) { row.push_back(u(i)); }
    for (int i = 0; i < nu; ++i) { row.push_back(prob.u_lo[0](i)); }
    for (int i = 0; i < nu; ++i) { row.push_back(prob.u_hi[0](i)); }
    row.push_back(fb.first);
    row.push_back(fb.second);
    for (int i = 0; i < 3; ++i) { row.push_back(dist.force_world(i)); }
    for (int i = 0; i < 3; ++i) { row.push_back(dist.torque_body(i)); }
    row.push_back(static_cast<double>(static_cast<int>(sol.status)));
    row.push_back(sol.qp_iterations);
    row.push_back(sol.active_set_size);
    row.push_back(sol.slack_max);
    row.push_back(so.record_timing ? sol.solve_time : 0.0);
    row.push_back(track);
    row.push_back(energy);
    res.log.rows.push_back(std::move(row));
    ++s.steps;

    // plant
    try {
      for (int j = 0; j < substeps; ++j) {
        const double tj = t + j * sc.dt_plant;
        x = plant_step(plant, x, u, sc.dt_plant, sc.disturbance.at(tj));
        if (noisy) { noise.next(); }
        for (int i = 0; i < n; ++i) {
          const double f = x(StateLayout::kForces + i);
          s.max_force_violation = std::max({s.max_force_violation, fb.first - f, f - fb.second});
        }
      }
    } catch (const DomainError & e) {
      s.diverged = true;
      s.divergence_reason = std::string("plant: ") + e.what();
      break;
    }
    if (!x.allFinite()) {
      s.diverged = true;
      s.divergence_reason = "plant: non-finite state";
      break;
    }
    const double perr = (x.segment<3>(StateLayout::kPos) - ref.sample(t + sc.t_ctrl).p).norm();
    if (perr > sc.abort_radius) {
      s.diverged = true;
      s.divergence_reason = "position error above abort radius";
      break;
    }
  }
  if (s.steps > 0) {
    s.mean_solve_time = time_sum / s.steps;
    s.timing_chain_fraction = static_cast<double>(chain_ok) / s.steps;
  }
  if (!so.record_timing) { s.mean_solve_time = s.max_solve_time = s.timing_chain_fraction = 0.0; }
  return res;
}

}  // namespace mrav
