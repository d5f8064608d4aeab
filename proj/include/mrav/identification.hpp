#pragma once

// Offline identification: rotor acceleration limits from ramp excitation on a
// motor bench, and the allocation matrix from free-flight logs.

#include "actuator.hpp"
#include "dynamics.hpp"
#include "rotation.hpp"

#include <cstdint>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

namespace mrav::ident {

struct RampPlan
{
  std::vector<double> setpoints;  // Hz
  double half_width = 10.0;       // Hz
  std::vector<double> slopes;     // Hz/s, magnitudes; each is run up and down
  double rest = 0.5;              // s, hold between ramps
  double dt = 1e-3;               // s, command sample time

  void validate(double speed_lo, double speed_hi) const
  {
    if (setpoints.empty() || slopes.empty()) { throw ConfigError("ramp plan needs setpoints and slopes"); }
    if (!(half_width > 0.0)) { throw ConfigError("ramp half width must be positive"); }
    if (!(rest >= 0.0) || !(dt > 0.0)) { throw ConfigError("ramp plan needs rest >= 0 and dt > 0"); }
    for (double s : slopes) {
      if (!(std::abs(s) > 0.0)) { throw ConfigError("ramp slopes must be nonzero"); }
    }
    for (double w : setpoints) {
      if (w - half_width < speed_lo || w + half_width > speed_hi) {
        throw ConfigError(
          "ramp around " + std::to_string(w) + " Hz leaves the speed range [" + std::to_string(speed_lo) + ", "
          + std::to_string(speed_hi) + "]");
      }
    }
  }

  /// Setpoints lo..hi by step, slopes +-[s_lo, s_hi] by s_step.
  static RampPlan grid(double w_lo, double w_hi, double w_step, double half_width, double s_lo, double s_hi, double s_step)
  {
    RampPlan p;
    for (double w = w_lo; w <= w_hi + 1e-9; w += w_step) { p.setpoints.push_back(w); }
    for (double s = s_lo; s <= s_hi + 1e-9; s += s_step) { p.slopes.push_back(s); }
    p.half_width = half_width;
    return p;
  }
};

/// One ramp of the profile, [t_start, t_end] in profile time.
struct RampSegment
{
  int setpoint_index = 0;
  double setpoint = 0.0;
  double slope = 0.0;  // signed
  double t_start = 0.0;
  double t_end = 0.0;
};

struct SpeedProfile
{
  std::vector<double> t;
  std::vector<double> w;
  std::vector<RampSegment> segments;
};

/**
 * @brief Commanded speed for a ramp plan.
 *
 * Per setpoint: a slow approach to w*-delta, then for each slope magnitude in
 * order a ramp up to w*+delta, a rest, a ramp down to w*-delta and a rest.
 * The command never jumps, so rests settle the motor before each ramp.
 */
inline SpeedProfile generate_ramp_plan(const RampPlan & plan, double speed_lo, double speed_hi)
{
  plan.validate(speed_lo, speed_hi);
  SpeedProfile out;
  const double dt = plan.dt;
  const double approach = *std::min_element(plan.slopes.begin(), plan.slopes.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
  double t = 0.0;
  double w = plan.setpoints.front() - plan.half_width;

  auto emit_until = [&](double t_end, auto && value) {
    while (t < t_end - 1e-12) {
      out.t.push_back(t);
      out.w.push_back(value(t));
      t = static_cast<double>(out.t.size()) * dt;
    }
  };
  auto hold = [&](double duration) {
    const double v = w;
    emit_until(t + duration, [v](double) { return v; });
  };
  auto ramp_to = [&](double target, double slope_mag) {
    const double t0 = t, w0 = w;
    const double s = target > w0 ? slope_mag : -slope_mag;
    const double t1 = t0 + std::abs(target - w0) / slope_mag;
    emit_until(t1, [=](double tt) { return w0 + s * (tt - t0); });
    w = target;
    return std::pair<double, double>(t0, t1);
  };

  hold(plan.rest);
  for (std::size_t h = 0; h < plan.setpoints.size(); ++h) {
    const double ws = plan.setpoints[h];
    ramp_to(ws - plan.half_width, std::abs(approach));
    hold(plan.rest);
    for (double s : plan.slopes) {
      const double m = std::abs(s);
      auto up = ramp_to(ws + plan.half_width, m);
      out.segments.push_back({static_cast<int>(h), ws, m, up.first, up.second});
      hold(plan.rest);
      auto down = ramp_to(ws - plan.half_width, m);
      out.segments.push_back({static_cast<int>(h), ws, -m, down.first, down.second});
      hold(plan.rest);
    }
  }
  return out;
}

/// Thrust error for a speed tracking error: c_f (2 w_d e_w - e_w^2), e_w = w_d - w.
inline double force_error(double c_f, double w_desired, double w_measured)
{
  const double e = w_desired - w_measured;
  return c_f * (2.0 * w_desired * e - e * e);
}

/// First-order low-pass run forward then backward (zero phase). cutoff <= 0
/// or infinite returns the input unchanged.
inline std::vector<double> zero_phase_lowpass(const std::vector<double> & x, double dt, double cutoff)
{
  if (!(cutoff > 0.0) || std::isinf(cutoff) || x.empty()) { return x; }
  const double a = std::exp(-cutoff * dt);
  std::vector<double> y(x.size());
  double s = x.front();
  for (std::size_t k = 0; k < x.size(); ++k) {
    s = a * s + (1.0 - a) * x[k];
    y[k] = s;
  }
  s = y.back();
  for (std::size_t k = x.size(); k-- > 0;) {
    s = a * s + (1.0 - a) * y[k];
    y[k] = s;
  }
  return y;
}

struct SpeedLog
{
  std::vector<double> t, w_desired, w_measured;

  void validate() const
  {
    if (t.size() != w_desired.size() || t.size() != w_measured.size()) { throw ConfigError("speed log columns differ in length"); }
    if (t.size() < 3) { throw ConfigError("speed log too short"); }
    for (std::size_t k = 1; k < t.size(); ++k) {
      if (!(t[k] > t[k - 1])) { throw ConfigError("speed log time must be strictly increasing"); }
    }
  }
};

/// Mean |e_f| over the central 30% of every ramp, in plan order.
struct SegmentError
{
  RampSegment segment;
  double mean_force_error = 0.0;
  int samples = 0;
};

inline std::vector<SegmentError> segment_errors(
  const SpeedLog & log, const SpeedProfile & profile, double c_f, double filter_cutoff)
{
  log.validate();
  const double dt = (log.t.back() - log.t.front()) / static_cast<double>(log.t.size() - 1);
  const std::vector<double> wf = zero_phase_lowpass(log.w_measured, dt, filter_cutoff);
  std::vector<SegmentError> out;
  out.reserve(profile.segments.size());
  std::size_t k = 0;
  for (const auto & seg : profile.segments) {
    const double mid = 0.5 * (seg.t_start + seg.t_end), half = 0.15 * (seg.t_end - seg.t_start);
    SegmentError se{seg, 0.0, 0};
    while (k < log.t.size() && log.t[k] < mid - half) { ++k; }
    std::size_t j = k;
    double sum = 0.0;
    for (; j < log.t.size() && log.t[j] <= mid + half; ++j) {
      sum += std::abs(force_error(c_f, log.w_desired[j], wf[j]));
      ++se.samples;
    }
    if (se.samples == 0) {
      throw IdentificationError("speed log does not cover the ramp at " + std::to_string(seg.setpoint) + " Hz, slope " + std::to_string(seg.slope));
    }
    se.mean_force_error = sum / se.samples;
    out.push_back(se);
  }
  return out;
}

/**
 * @brief Acceleration-limit table from a bench log of a ramp plan.
 *
 * Per setpoint and sign the limit is the largest slope magnitude whose mean
 * central error stays within eps_f.
 */
inline AccelLimitTable extract_accel_limits(
  const SpeedLog & log, const RampPlan & plan, double speed_lo, double speed_hi, double c_f, double eps_f, double filter_cutoff)
{
  if (!(eps_f > 0.0)) { throw ConfigError("eps_f must be positive"); }
  const SpeedProfile profile = generate_ramp_plan(plan, speed_lo, speed_hi);
  const auto errs = segment_errors(log, profile, c_f, filter_cutoff);
  AccelLimitTable t;
  t.speeds = plan.setpoints;
  t.accel_lo.assign(plan.setpoints.size(), 0.0);
  t.accel_hi.assign(plan.setpoints.size(), 0.0);
  for (const auto & e : errs) {
    if (e.mean_force_error > eps_f) { continue; }
    const std::size_t h = static_cast<std::size_t>(e.segment.setpoint_index);
    if (e.segment.slope > 0.0) {
      t.accel_hi[h] = std::max(t.accel_hi[h], e.segment.slope);
    } else {
      t.accel_lo[h] = std::min(t.accel_lo[h], e.segment.slope);
    }
  }
  for (std::size_t h = 0; h < t.speeds.size(); ++h) {
    if (t.accel_hi[h] == 0.0 || t.accel_lo[h] == 0.0) {
      const char * side = t.accel_hi[h] == 0.0 ? "positive" : "negative";
      char msg[160];
      std::snprintf(msg, sizeof msg, "no %s slope meets eps_f = %g N at setpoint %g Hz", side, eps_f, t.speeds[h]);
      throw IdentificationError(msg);
    }
  }
  return t;
}

/// Bench motor used as an oracle: first-order speed loop with a
/// speed-dependent hard acceleration limit and optional measurement noise.
struct SyntheticMotor
{
  double time_constant = 5e-4;  // s
  AccelLimitTable limits;
  double noise_sigma = 0.0;  // Hz
  std::uint64_t seed = 1;
  int substeps = 10;

  SpeedLog run(const SpeedProfile & profile) const
  {
    SpeedLog log;
    log.t = profile.t;
    log.w_desired = profile.w;
    log.w_measured.resize(profile.w.size());
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01(0.0, 1.0);
    double w = profile.w.front();
    for (std::size_t k = 0; k < profile.w.size(); ++k) {
      log.w_measured[k] = w + (noise_sigma > 0.0 ? noise_sigma * n01(rng) : 0.0);
      if (k + 1 == profile.w.size()) { break; }
      const double dt = (profile.t[k + 1] - profile.t[k]) / substeps;
      for (int j = 0; j < substeps; ++j) {
        // command interpolated within the sample
        const double wd = profile.w[k] + (profile.w[k + 1] - profile.w[k]) * (j + 1.0) / substeps;
        const auto lim = limits.at(w);
        const double rate = std::clamp((wd - w) / time_constant, lim.first, lim.second);
        w += dt * rate;
      }
    }
    return log;
  }
};

/// The bench motor behind the setup II table; its braking limit changes with speed.
inline SyntheticMotor setup_two_bench()
{
  SyntheticMotor m;
  m.limits.speeds = {30, 40, 50, 60, 70, 80, 90};
  m.limits.accel_lo = {-110, -135, -160, -180, -190, -190, -185};
  m.limits.accel_hi = {215, 215, 215, 210, 205, 200, 195};
  return m;
}

/// Threshold that separates one 10 Hz/s step beyond the limit for the
/// synthetic motors above with c_f = c_f_ref.
inline double synthetic_eps(double c_f) { return 0.035 * c_f / 9.9e-4; }

// allocation ---------------------------------------------------------------

struct FlightLog
{
  std::vector<double> t;
  std::vector<Vec3> p;
  std::vector<Mat3> r;
  std::vector<Vec> w;  // rotor speeds, Hz

  int rotors() const { return w.empty() ? 0 : static_cast<int>(w.front().size()); }

  void validate() const
  {
    const std::size_t n = t.size();
    if (p.size() != n || r.size() != n || w.size() != n) { throw ConfigError("flight log columns differ in length"); }
    if (n < 10) { throw ConfigError("flight log too short"); }
    for (std::size_t k = 0; k < n; ++k) {
      if (k > 0 && !(t[k] > t[k - 1])) { throw ConfigError("flight log time must be strictly increasing"); }
      if ((r[k].transpose() * r[k] - Mat3::Identity()).norm() > 1e-6) {
        throw ConfigError("flight log rotation at row " + std::to_string(k) + " is not orthonormal");
      }
      if (w[k].size() != w.front().size()) { throw ConfigError("flight log rotor count changes"); }
    }
  }
};

struct AllocationResult
{
  AllocationMatrix g;
  double residual = 0.0;   // RMS of the stacked fit error
  double condition = 0.0;  // of the force regressor
};

namespace detail {

/// Fourth-order central difference, second order at the two outer samples per side.
inline std::vector<double> derivative(const std::vector<double> & x, double dt)
{
  const std::size_t n = x.size();
  std::vector<double> d(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    if (k >= 2 && k + 2 < n) {
      d[k] = (x[k - 2] - 8.0 * x[k - 1] + 8.0 * x[k + 1] - x[k + 2]) / (12.0 * dt);
    } else if (k >= 1 && k + 1 < n) {
      d[k] = (x[k + 1] - x[k - 1]) / (2.0 * dt);
    } else if (k == 0) {
      d[k] = (x[1] - x[0]) / dt;
    } else {
      d[k] = (x[k] - x[k - 1]) / dt;
    }
  }
  return d;
}

inline double interp(const std::vector<double> & t, const std::vector<double> & x, double tq, std::size_t & i)
{
  while (i + 2 < t.size() && t[i + 1] <= tq) { ++i; }
  const double s = (tq - t[i]) / (t[i + 1] - t[i]);
  return x[i] + s * (x[i + 1] - x[i]);
}

/// Nearest rotation in the Frobenius sense.
inline Mat3 project_rotation(const Mat3 & m)
{
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Mat3 u = svd.matrixU();
    u.col(2) *= -1.0;
    r = u * svd.matrixV().transpose();
  }
  return r;
}

}  // namespace detail

/**
 * @brief Least-squares allocation matrix from a flight log.
 *
 * The log is resampled on a uniform grid, low-passed with zero phase,
 * differentiated for p_ddot and omega (from R_dot) and omega_dot, and the
 * measured wrench y_k = [m R'(p_ddot + g e3); J omega_dot + omega x J omega]
 * is regressed on the rotor forces c_f w^2. Mass, inertia, gravity and c_f
 * come from the prior. At least @p trim samples are dropped at each end, more
 * when the filter is on.
 */
inline AllocationResult identify_allocation(
  const FlightLog & log, const VehicleModel & prior, double filter_cutoff, int trim = 4, double rank_tol = 1e-9)
{
  log.validate();
  const int n = log.rotors();
  if (n != prior.rotor_count()) { throw ConfigError("flight log rotor count does not match the prior model"); }
  const std::size_t k_raw = log.t.size();
  const double dt = (log.t.back() - log.t.front()) / static_cast<double>(k_raw - 1);

  // uniform grid with the same number of samples
  const std::size_t kk = k_raw;
  std::vector<double> tg(kk);
  for (std::size_t k = 0; k < kk; ++k) { tg[k] = log.t.front() + dt * static_cast<double>(k); }
  auto channel = [&](auto && get) {
    std::vector<double> src(k_raw), out(kk);
    for (std::size_t k = 0; k < k_raw; ++k) { src[k] = get(k); }
    std::size_t i = 0;
    for (std::size_t k = 0; k < kk; ++k) { out[k] = detail::interp(log.t, src, tg[k], i); }
    return zero_phase_lowpass(out, dt, filter_cutoff);
  };

  std::vector<std::vector<double>> pos(3), acc(3), rel(9), rdot(9);
  for (int i = 0; i < 3; ++i) {
    pos[i] = channel([&](std::size_t k) { return log.p[k](i); });
    acc[i] = detail::derivative(detail::derivative(pos[i], dt), dt);
  }
  for (int i = 0; i < 9; ++i) {
    rel[i] = channel([&](std::size_t k) { return log.r[k](i / 3, i % 3); });
    rdot[i] = detail::derivative(rel[i], dt);
  }
  std::vector<Mat3> rg(kk);
  std::vector<std::vector<double>> om(3, std::vector<double>(kk));
  for (std::size_t k = 0; k < kk; ++k) {
    Mat3 r, rd;
    for (int i = 0; i < 9; ++i) {
      r(i / 3, i % 3) = rel[i][k];
      rd(i / 3, i % 3) = rdot[i][k];
    }
    rg[k] = detail::project_rotation(r);
    const Vec3 w = vee(rg[k].transpose() * rd);
    for (int i = 0; i < 3; ++i) { om[i][k] = w(i); }
  }
  std::vector<std::vector<double>> omd(3);
  for (int i = 0; i < 3; ++i) { omd[i] = detail::derivative(om[i], dt); }
  std::vector<std::vector<double>> speeds(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    speeds[static_cast<std::size_t>(i)] = channel([&](std::size_t k) { return log.w[k](i); });
  }

  // the filter's edge transients last a few time constants
  int edge = trim;
  if (filter_cutoff > 0.0 && std::isfinite(filter_cutoff)) { edge = std::max(edge, static_cast<int>(std::ceil(5.0 / (filter_cutoff * dt)))); }
  const std::size_t tr = static_cast<std::size_t>(std::max(edge, 2));
  if (kk <= 2 * tr + static_cast<std::size_t>(n)) { throw IdentificationError("flight log too short for the regression"); }
  const Eigen::Index m = static_cast<Eigen::Index>(kk - 2 * tr);
  Mat f(m, n), y(m, 6);
  const Mat3 & j = prior.inertia();
  for (Eigen::Index row = 0; row < m; ++row) {
    const std::size_t k = static_cast<std::size_t>(row) + tr;
    const Vec3 a(acc[0][k], acc[1][k], acc[2][k]);
    const Vec3 w(om[0][k], om[1][k], om[2][k]);
    const Vec3 wd(omd[0][k], omd[1][k], omd[2][k]);
    y.block<1, 3>(row, 0) = (prior.mass() * rg[k].transpose() * (a + prior.gravity() * Vec3::UnitZ())).transpose();
    y.block<1, 3>(row, 3) = (j * wd + w.cross(j * w)).transpose();
    for (int i = 0; i < n; ++i) {
      const double s = speeds[static_cast<std::size_t>(i)][k];
      f(row, i) = prior.c_f() * s * s;
    }
  }

  // The stacked system Lambda beta = xi decouples into one regression per
  // wrench component, y(:, r) = F G(r, :)'.
  Eigen::JacobiSVD<Mat> svd(f, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto & sv = svd.singularValues();
  AllocationResult res;
  res.condition = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : std::numeric_limits<double>::infinity();
  if (!(sv(sv.size() - 1) > rank_tol * sv(0))) {
    throw IdentificationError(
      "force regressor is rank deficient (condition number " + std::to_string(res.condition) + "); the flight is not exciting enough");
  }
  const Mat gt = svd.solve(y);
  res.g = gt.transpose();
  res.residual = std::sqrt((f * gt - y).squaredNorm() / static_cast<double>(y.size()));
  return res;
}

/// Entrywise 100 (g - g_hat) / g; NaN where the nominal entry is zero.
inline Mat relative_error_percent(const AllocationMatrix & nominal, const AllocationMatrix & identified)
{
  Mat e(nominal.rows(), nominal.cols());
  for (Eigen::Index i = 0; i < e.rows(); ++i) {
    for (Eigen::Index k = 0; k < e.cols(); ++k) {
      const double g = nominal(i, k);
      e(i, k) = g == 0.0 ? std::numeric_limits<double>::quiet_NaN() : 100.0 * (g - identified(i, k)) / g;
    }
  }
  return e;
}

struct FlightExcitation
{
  double duration = 6.0;        // s
  double dt_log = 1e-3;         // s
  int substeps = 10;            // integration steps per log sample
  double amplitude = 0.4;       // N, per rotor
  double base_frequency = 3.0;  // rad/s, rotor i uses base (1 + 0.37 i)
  double force_noise = 0.0;     // relative, applied to the logged speeds through f
  std::uint64_t seed = 1;
};

/**
 * @brief Flight of @p truth under a smooth hover controller designed on
 * @p nominal, with multi-sine rotor forces added on top.
 *
 * The controller is a PD on position and attitude mapped to forces through
 * the pseudo-inverse of the nominal allocation; it is evaluated inside every
 * integrator stage, so forces are smooth in time and numerical derivatives of
 * the logged pose stay accurate. The logged speeds optionally carry
 * multiplicative force noise.
 */
inline FlightLog synthetic_flight(const VehicleModel & truth, const VehicleModel & nominal, const FlightExcitation & ex)
{
  if (truth.tiltable() || nominal.tiltable()) { throw ConfigError("synthetic flight supports fixed-rotor vehicles"); }
  const int n = truth.rotor_count();
  if (nominal.rotor_count() != n) { throw ConfigError("nominal and true vehicle differ in rotor count"); }
  const Mat ginv = allocation_matrix(nominal).completeOrthogonalDecomposition().pseudoInverse();
  Vec freq(n), phase(n);
  for (int i = 0; i < n; ++i) {
    freq(i) = ex.base_frequency * (1.0 + 0.37 * i);
    phase(i) = 0.9 * i;
  }
  const Vec3 p_ref(0, 0, 1);
  const double m = nominal.mass(), g0 = nominal.gravity();
  const Mat3 & j = nominal.inertia();
  auto forces = [&](const Vec & x, double t) {
    const Mat3 r = euler::rotation(x.segment<3>(StateLayout::kEta));
    const Vec3 ep = x.segment<3>(StateLayout::kPos) - p_ref;
    const Vec3 fw = m * (-4.0 * ep - 4.0 * x.segment<3>(StateLayout::kVel) + g0 * Vec3::UnitZ());
    const Vec3 er = 0.5 * vee(r - r.transpose());
    const Vec3 tb = j * (-64.0 * er - 16.0 * x.segment<3>(StateLayout::kOmega));
    Wrench w;
    w << r.transpose() * fw, tb;
    Vec f = ginv * w;
    for (int i = 0; i < n; ++i) { f(i) += ex.amplitude * std::sin(freq(i) * t + phase(i)); }
    return f;
  };
  const Vec zero_u = Vec::Zero(n);
  auto rhs = [&](Vec x, double t) {
    x.segment(StateLayout::kForces, n) = forces(x, t);
    return continuous_dynamics(truth, x, zero_u);
  };

  Vec x = Vec::Zero(truth.layout().state_dim());
  x.segment<3>(StateLayout::kPos) = p_ref;
  FlightLog log;
  std::mt19937_64 rng(ex.seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  const long samples = static_cast<long>(std::floor(ex.duration / ex.dt_log + 1e-9)) + 1;
  const double h = ex.dt_log / ex.substeps;
  for (long k = 0; k < samples; ++k) {
    const double t = static_cast<double>(k) * ex.dt_log;
    log.t.push_back(t);
    log.p.push_back(x.segment<3>(StateLayout::kPos));
    log.r.push_back(euler::rotation(x.segment<3>(StateLayout::kEta)));
    const Vec f = forces(x, t);
    Vec w(n);
    for (int i = 0; i < n; ++i) {
      double fi = f(i);
      if (ex.force_noise > 0.0) { fi *= 1.0 + ex.force_noise * n01(rng); }
      w(i) = std::sqrt(std::max(fi, 0.0) / truth.c_f());
    }
    log.w.push_back(w);
    if (k + 1 == samples) { break; }
    for (int s = 0; s < ex.substeps; ++s) {
      const double ts = t + s * h;
      const Vec k1 = rhs(x, ts);
      const Vec k2 = rhs(x + 0.5 * h * k1, ts + 0.5 * h);
      const Vec k3 = rhs(x + 0.5 * h * k2, ts + 0.5 * h);
      const Vec k4 = rhs(x + h * k3, ts + h);
      x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
  }
  return log;
}

}  // namespace mrav::ident
