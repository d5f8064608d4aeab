#pragma once

// Weights, reference signals and the assembly of the per-sample OCP for a
// multi-rotor with the enhanced actuator model.

#include "actuator.hpp"
#include "dynamics.hpp"
#include "ocp_problem.hpp"

#include <cmath>
#include <optional>

namespace mrav {

struct StageWeights
{
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Vec3 acc = Vec3::Zero();
  Vec3 eta = Vec3::Zero();
  Vec3 omega = Vec3::Zero();
  Vec3 angacc = Vec3::Zero();
  double energy = 0.0;

  Vec to_vector(bool with_energy) const
  {
    Vec q(18 + (with_energy ? 1 : 0));
    q << p, v, acc, eta, omega, angacc;
    if (with_energy) { q(18) = energy; }
    return q;
  }
};

struct Weights
{
  StageWeights stage;
  std::optional<StageWeights> terminal;  // defaults to the stage weights
  Vec r_u;                               // per-rotor input weights (empty means zero)
  double r_tilt = 0.0;
  double slack_penalty = 1e4;

  void validate() const
  {
    const auto neg = [](const StageWeights & w) {
      return (w.p.array() < 0).any() || (w.v.array() < 0).any() || (w.acc.array() < 0).any() || (w.eta.array() < 0).any()
             || (w.omega.array() < 0).any() || (w.angacc.array() < 0).any() || w.energy < 0.0;
    };
    if (neg(stage) || (terminal && neg(*terminal)) || (r_u.size() > 0 && (r_u.array() < 0).any()) || r_tilt < 0.0) {
      throw ConfigError("weights must be nonnegative");
    }
    if (!(slack_penalty > 0.0)) { throw ConfigError("slack penalty must be positive"); }
  }
};

struct ReferenceSample
{
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Vec3 a = Vec3::Zero();
  Vec3 eta = Vec3::Zero();
  Vec3 omega = Vec3::Zero();
  Vec3 omega_dot = Vec3::Zero();
  double energy = 0.0;

  Vec to_output(bool with_energy) const
  {
    Vec y(18 + (with_energy ? 1 : 0));
    y << p, v, a, eta, omega, omega_dot;
    if (with_energy) { y(18) = energy; }
    return y;
  }
};

/**
 * @brief Chirp, step sequence or hover reference, sampled as y_r(t).
 *
 * The chirp is c(t) = nu sin(xi t^2) on [0, tbar), its point-symmetric
 * continuation -c(2 tbar - t) on [tbar, 2 tbar), and zero afterwards.
 */
class Reference
{
public:
  enum class Kind { chirp, step, hover };

  static Reference chirp(double amplitude, double slope, double t_bar, int axis = 0, Vec3 offset = Vec3::Zero())
  {
    if (!(amplitude > 0.0) || !(slope > 0.0) || !(t_bar > 0.0)) { throw ConfigError("chirp parameters must be positive"); }
    if (axis < 0 || axis > 2) { throw ConfigError("chirp axis must be 0, 1 or 2"); }
    Reference r;
    r.kind_ = Kind::chirp;
    r.nu_ = amplitude;
    r.xi_ = slope;
    r.t_bar_ = t_bar;
    r.axis_ = axis;
    r.p1_ = offset;
    return r;
  }

  /// p1 on [0, period), p2 on [period, 2 period), and so on.
  static Reference step(const Vec3 & p1, const Vec3 & p2, double period)
  {
    if (!(period > 0.0)) { throw ConfigError("step period must be positive"); }
    Reference r;
    r.kind_ = Kind::step;
    r.p1_ = p1;
    r.p2_ = p2;
    r.period_ = period;
    return r;
  }

  static Reference hover(const Vec3 & p, const Vec3 & eta = Vec3::Zero())
  {
    Reference r;
    r.kind_ = Kind::hover;
    r.p1_ = p;
    r.eta_ = eta;
    return r;
  }

  Kind kind() const { return kind_; }
  /// Steps are revealed to the controller only when they happen.
  bool previewless() const { return kind_ == Kind::step; }
  double period() const { return period_; }

  void set_energy(double c_e) { energy_ = c_e; }
  double energy() const { return energy_; }

  /// Instantaneous chirp slope-frequency xi(t): rises as xi t, then falls symmetrically.
  double chirp_frequency(double t) const
  {
    if (t < 0.0 || t >= 2.0 * t_bar_) { return 0.0; }
    return t < t_bar_ ? xi_ * t : xi_ * (2.0 * t_bar_ - t);
  }

  /// (c, c_dot, c_ddot) of the scalar chirp signal.
  Eigen::Vector3d chirp_signal(double t) const
  {
    if (t < 0.0 || t >= 2.0 * t_bar_) { return Eigen::Vector3d::Zero(); }
    const bool up = t < t_bar_;
    const double s = up ? t : 2.0 * t_bar_ - t;
    const double ph = xi_ * s * s;
    const double c = nu_ * std::sin(ph);
    const double cd = nu_ * std::cos(ph) * 2.0 * xi_ * s;
    const double cdd = nu_ * (2.0 * xi_ * std::cos(ph) - 4.0 * xi_ * xi_ * s * s * std::sin(ph));
    // c(t) = -c_up(2 tbar - t): value and 2nd derivative flip sign, 1st does not
    return up ? Eigen::Vector3d(c, cd, cdd) : Eigen::Vector3d(-c, cd, -cdd);
  }

  ReferenceSample sample(double t) const
  {
    ReferenceSample s;
    s.energy = energy_;
    switch (kind_) {
      case Kind::chirp: {
        const auto c = chirp_signal(t);
        s.p = p1_;
        s.p(axis_) += c(0);
        s.v(axis_) = c(1);
        s.a(axis_) = c(2);
        break;
      }
      case Kind::step: {
        const long k = static_cast<long>(std::floor(t / period_));
        s.p = (k % 2 == 0) ? p1_ : p2_;
        break;
      }
      case Kind::hover:
        s.p = p1_;
        s.eta = eta_;
        break;
    }
    return s;
  }

private:
  Kind kind_ = Kind::hover;
  double nu_ = 0.0, xi_ = 0.0, t_bar_ = 0.0;
  int axis_ = 0;
  Vec3 p1_ = Vec3::Zero(), p2_ = Vec3::Zero(), eta_ = Vec3::Zero();
  double period_ = 1.0;
  double energy_ = 0.0;
};

/// Hover energy reference n (mg/n)^2.
inline double hover_energy(const VehicleModel & m)
{
  const double f = m.mass() * m.gravity() / m.rotor_count();
  return m.rotor_count() * f * f;
}

enum class BoundPolicy {
  frozen,       // force-rate bounds evaluated at the measured forces, held over the horizon
  time_varying  // from the previous predicted forces; reserved, not implemented
};

struct AssemblyOptions
{
  int horizon_steps = 10;
  double step = 0.1;
  double tightening = 0.98;
  BoundPolicy policy = BoundPolicy::frozen;
  bool energy_output = false;
};

struct AssemblyReport
{
  bool forces_clamped = false;
  bool bounds_clamped = false;
};

/// Box shrunk by (1 - factor) of each bound's magnitude; a zero bound stays put.
inline std::pair<double, double> tightened(std::pair<double, double> b, double factor)
{
  const double m = 1.0 - factor;
  return {b.first + m * std::abs(b.first), b.second - m * std::abs(b.second)};
}

inline OcpProblem assemble(
  const VehicleModel & model, const ActuatorModel & act, const Weights & w, const Reference & ref, const Vec & x_k, double t_k,
  const AssemblyOptions & opt, AssemblyReport * report = nullptr)
{
  if (opt.policy != BoundPolicy::frozen) { throw ConfigError("only the frozen bound policy is implemented"); }
  if (opt.horizon_steps < 1 || !(opt.step > 0.0)) { throw ConfigError("invalid horizon"); }
  if (!(opt.tightening > 0.0 && opt.tightening <= 1.0)) { throw ConfigError("tightening factor must be in (0, 1]"); }
  w.validate();
  const auto l = model.layout();
  const int n = l.rotors, nu = l.input_dim();
  if (x_k.size() != l.state_dim()) { throw ConfigError("state has wrong dimension"); }

  OcpProblem p;
  p.horizon_steps = opt.horizon_steps;
  p.step = opt.step;
  p.x0 = x_k;
  p.slack_penalty = w.slack_penalty;

  const auto fb = force_bounds(act);
  AssemblyReport rep;
  for (int i = 0; i < n; ++i) {
    double & f = p.x0(StateLayout::kForces + i);
    const double fc = std::clamp(f, fb.first, fb.second);
    if (std::abs(fc - f) > 1e-9) { rep.forces_clamped = true; }
    f = fc;
  }

  p.y_ref.resize(opt.horizon_steps + 1);
  for (int h = 0; h <= opt.horizon_steps; ++h) {
    const double t = ref.previewless() ? t_k : t_k + h * opt.step;
    p.y_ref[h] = ref.sample(t).to_output(opt.energy_output);
  }

  p.q_stage = w.stage.to_vector(opt.energy_output);
  p.q_terminal = w.terminal ? w.terminal->to_vector(opt.energy_output) : p.q_stage;
  p.r_input = Vec::Zero(nu);
  if (w.r_u.size() > 0) {
    if (w.r_u.size() != n) { throw ConfigError("r_u needs one entry per rotor"); }
    p.r_input.head(n) = w.r_u;
  }
  if (l.tilt) { p.r_input(n) = w.r_tilt; }

  Vec lo(nu), hi(nu);
  for (int i = 0; i < n; ++i) {
    bool clamped = false;
    const auto rb = force_rate_bounds(act, x_k(StateLayout::kForces + i), &clamped);
    rep.bounds_clamped = rep.bounds_clamped || clamped;
    lo(i) = rb.first;
    hi(i) = rb.second;
  }
  if (l.tilt) {
    lo(n) = model.tilt_limits().rate_lo;
    hi(n) = model.tilt_limits().rate_hi;
  }
  p.u_lo.assign(opt.horizon_steps, lo);
  p.u_hi.assign(opt.horizon_steps, hi);

  const auto tb = tightened(fb, opt.tightening);
  for (int i = 0; i < n; ++i) { p.state_boxes.push_back({StateLayout::kForces + i, tb.first, tb.second, true}); }
  if (l.tilt) {
    const auto ab = tightened({model.tilt_limits().angle_lo, model.tilt_limits().angle_hi}, opt.tightening);
    p.state_boxes.push_back({l.tilt_index(), ab.first, ab.second, true});
  }
  if (report) { *report = rep; }
  return p;
}

}  // namespace mrav
