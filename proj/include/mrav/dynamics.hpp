#pragma once

/**
 * @file
 * @brief Rigid-body model of a multi-rotor with arbitrarily placed and
 * oriented rotors.
 *
 * The state is x = [p, v, eta, omega, gamma (, alpha)] where gamma are the
 * rotor thrust intensities and alpha the optional synchronous tilt angle.
 * The input is u = [gamma_dot (, alpha_dot)].
 */

#include "rotation.hpp"
#include "types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mrav {

/**
 * @brief Pose and spin direction of one propeller.
 *
 * For a tiltable rotor the orientation depends on the synchronous tilt
 * angle alpha: R(alpha) = arm_frame * Rx(tilt_sign * alpha) * cant_frame.
 */
struct RotorGeometry
{
  Vec3 position_in_body = Vec3::Zero();
  Mat3 orientation_in_body = Mat3::Identity();
  int spin_sign = 1;
  bool tiltable = false;

  Mat3 arm_frame = Mat3::Identity();
  Mat3 cant_frame = Mat3::Identity();
  double tilt_sign = 1.0;

  Mat3 orientation(std::optional<double> tilt = {}) const
  {
    if (!tiltable) { return orientation_in_body; }
    return arm_frame * rot_x(tilt_sign * tilt.value_or(0.0)) * cant_frame;
  }

  /// d orientation / d alpha (zero for fixed rotors).
  Mat3 orientation_derivative(double tilt) const
  {
    if (!tiltable) { return Mat3::Zero(); }
    return arm_frame * rot_x(tilt_sign * tilt) * skew(tilt_sign * Vec3::UnitX()) * cant_frame;
  }

  /// Builds R = Rz(arm) Rx(alpha) Ry(beta) with position Rz(arm) [l 0 0].
  static RotorGeometry on_arm(double arm_angle, double arm_length, double alpha, double beta, int spin)
  {
    RotorGeometry r;
    r.position_in_body = rot_z(arm_angle) * Vec3(arm_length, 0.0, 0.0);
    r.orientation_in_body = rot_z(arm_angle) * rot_x(alpha) * rot_y(beta);
    r.spin_sign = spin;
    r.arm_frame = rot_z(arm_angle);
    r.cant_frame = rot_y(beta);
    r.tilt_sign = alpha < 0.0 ? -1.0 : 1.0;
    return r;
  }

  /// Rotor whose alpha is the synchronous tilt state, multiplied by tilt_sign.
  static RotorGeometry tiltable_on_arm(double arm_angle, double arm_length, double tilt_sign, double beta, int spin)
  {
    RotorGeometry r = on_arm(arm_angle, arm_length, 0.0, beta, spin);
    r.tiltable = true;
    r.tilt_sign = tilt_sign;
    return r;
  }
};

/// Admissible range of the synchronous tilt angle and its rate [rad, rad/s].
struct TiltLimits
{
  double angle_lo = -35.0 * kDegToRad;
  double angle_hi = 35.0 * kDegToRad;
  double rate_lo = -8.75 * kDegToRad;
  double rate_hi = 8.75 * kDegToRad;
};

/// Index bookkeeping for the stacked state/input vectors.
struct StateLayout
{
  int rotors = 0;
  bool tilt = false;

  static constexpr int kPos = 0;
  static constexpr int kVel = 3;
  static constexpr int kEta = 6;
  static constexpr int kOmega = 9;
  static constexpr int kForces = 12;

  int state_dim() const { return 12 + rotors + (tilt ? 1 : 0); }
  int input_dim() const { return rotors + (tilt ? 1 : 0); }
  int tilt_index() const { return 12 + rotors; }
  int tilt_rate_index() const { return rotors; }
};

class VehicleModel
{
public:
  VehicleModel() = default;

  VehicleModel(
    double mass, const Mat3 & inertia, double gravity, std::vector<RotorGeometry> rotors, double c_f,
    double c_f_tau)
      : mass_(mass), inertia_(inertia), gravity_(gravity), rotors_(std::move(rotors)), c_f_(c_f),
        c_f_tau_(c_f_tau)
  {
    validate();
  }

  double mass() const { return mass_; }
  const Mat3 & inertia() const { return inertia_; }
  const Mat3 & inertia_inverse() const { return inertia_inv_; }
  double gravity() const { return gravity_; }
  double c_f() const { return c_f_; }
  double c_f_tau() const { return c_f_tau_; }
  const std::vector<RotorGeometry> & rotors() const { return rotors_; }
  int rotor_count() const { return static_cast<int>(rotors_.size()); }

  bool tiltable() const
  {
    for (const auto & r : rotors_) {
      if (r.tiltable) { return true; }
    }
    return false;
  }

  StateLayout layout() const { return {rotor_count(), tiltable()}; }

  const TiltLimits & tilt_limits() const { return tilt_limits_; }
  void set_tilt_limits(const TiltLimits & l) { tilt_limits_ = l; }

  /// Identified allocation matrix replacing the geometric one (fixed rotors only).
  const std::optional<AllocationMatrix> & allocation_override() const { return allocation_override_; }
  void set_allocation_override(const AllocationMatrix & g)
  {
    if (g.cols() != rotor_count()) { throw ConfigError("allocation override has wrong column count"); }
    if (tiltable()) { throw ConfigError("allocation override is not supported for tiltable rotors"); }
    allocation_override_ = g;
  }

  /// Copy with mass/inertia/thrust-coefficient scaled (plant mismatch studies).
  VehicleModel scaled(double mass_factor, double inertia_factor) const
  {
    VehicleModel m = *this;
    m.mass_ *= mass_factor;
    m.inertia_ *= inertia_factor;
    m.validate();
    return m;
  }

  /// Copy with the listed rotors removed (rotor failure).
  VehicleModel without_rotor(int index) const
  {
    if (index < 0 || index >= rotor_count()) { throw ConfigError("rotor index out of range"); }
    VehicleModel m = *this;
    m.rotors_.erase(m.rotors_.begin() + index);
    m.allocation_override_.reset();
    m.validate();
    return m;
  }

private:
  void validate()
  {
    if (!(mass_ > 0.0)) { throw ConfigError("mass must be positive"); }
    if (!(c_f_ > 0.0)) { throw ConfigError("c_f must be positive"); }
    if (!(c_f_tau_ > 0.0)) { throw ConfigError("c_f_tau must be positive"); }
    if (rotors_.empty()) { throw ConfigError("vehicle needs at least one rotor"); }
    if ((inertia_ - inertia_.transpose()).norm() > 1e-12 * (1.0 + inertia_.norm())) {
      throw ConfigError("inertia must be symmetric");
    }
    Eigen::LLT<Mat3> llt(inertia_);
    if (llt.info() != Eigen::Success) { throw ConfigError("inertia must be positive definite"); }
    for (const auto & r : rotors_) {
      if (r.spin_sign != 1 && r.spin_sign != -1) { throw ConfigError("spin_sign must be +1 or -1"); }
      const Mat3 o = r.orientation(0.0);
      if ((o.transpose() * o - Mat3::Identity()).norm() > 1e-9 || std::abs(o.determinant() - 1.0) > 1e-9) {
        throw ConfigError("rotor orientation must be a rotation matrix");
      }
    }
    inertia_inv_ = inertia_.inverse();
  }

  double mass_ = 1.0;
  Mat3 inertia_ = Mat3::Identity();
  Mat3 inertia_inv_ = Mat3::Identity();
  double gravity_ = 9.81;
  std::vector<RotorGeometry> rotors_;
  double c_f_ = 1.0;
  double c_f_tau_ = 1.0;
  TiltLimits tilt_limits_;
  std::optional<AllocationMatrix> allocation_override_;
};

/// Structured view of the state vector.
struct FullState
{
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Vec3 euler = Vec3::Zero();
  Vec3 body_rates = Vec3::Zero();
  Vec forces;
  std::optional<double> tilt;

  Vec to_vector() const
  {
    Vec x(12 + forces.size() + (tilt ? 1 : 0));
    x << position, velocity, euler, body_rates, forces;
    if (tilt) { x(x.size() - 1) = *tilt; }
    return x;
  }

  static FullState from_vector(const Vec & x, const StateLayout & l)
  {
    FullState s;
    s.position = x.segment<3>(StateLayout::kPos);
    s.velocity = x.segment<3>(StateLayout::kVel);
    s.euler = x.segment<3>(StateLayout::kEta);
    s.body_rates = x.segment<3>(StateLayout::kOmega);
    s.forces = x.segment(StateLayout::kForces, l.rotors);
    if (l.tilt) { s.tilt = x(l.tilt_index()); }
    return s;
  }
};

struct ControlInput
{
  Vec force_rates;
  std::optional<double> tilt_rate;

  Vec to_vector() const
  {
    Vec u(force_rates.size() + (tilt_rate ? 1 : 0));
    u.head(force_rates.size()) = force_rates;
    if (tilt_rate) { u(u.size() - 1) = *tilt_rate; }
    return u;
  }
};

/// y = [p, v, p_ddot, eta, omega, omega_dot (, c_e)]
struct OutputVector
{
  Vec3 position, velocity, linear_acceleration, euler, body_rates, angular_acceleration;
  std::optional<double> energy_cost;

  Vec to_vector() const
  {
    Vec y(18 + (energy_cost ? 1 : 0));
    y << position, velocity, linear_acceleration, euler, body_rates, angular_acceleration;
    if (energy_cost) { y(18) = *energy_cost; }
    return y;
  }
};

/// Wrench acting on the vehicle besides the rotors (world-frame force, body-frame torque).
struct ExternalWrench
{
  Vec3 force_world = Vec3::Zero();
  Vec3 torque_body = Vec3::Zero();
};

// ---------------------------------------------------------------------------

inline void require_tilt(const VehicleModel & model, const std::optional<double> & tilt)
{
  if (model.tiltable() && !tilt) { throw ConfigError("tilt angle required for a tiltable vehicle"); }
}

/// 6 x n map from thrust intensities to body wrench [f_B; tau_B].
inline AllocationMatrix allocation_matrix(const VehicleModel & model, std::optional<double> tilt = {})
{
  require_tilt(model, tilt);
  if (model.allocation_override()) { return *model.allocation_override(); }
  const int n = model.rotor_count();
  AllocationMatrix g(6, n);
  for (int j = 0; j < n; ++j) {
    const auto & r = model.rotors()[j];
    const Vec3 dir = r.orientation(tilt).col(2);
    g.col(j).head<3>() = dir;
    g.col(j).tail<3>() = (skew(r.position_in_body) + r.spin_sign * model.c_f_tau() * Mat3::Identity()) * dir;
  }
  return g;
}

/// d G / d alpha (zero columns for fixed rotors).
inline AllocationMatrix allocation_tilt_derivative(const VehicleModel & model, double tilt)
{
  const int n = model.rotor_count();
  AllocationMatrix dg = AllocationMatrix::Zero(6, n);
  for (int j = 0; j < n; ++j) {
    const auto & r = model.rotors()[j];
    if (!r.tiltable) { continue; }
    const Vec3 ddir = r.orientation_derivative(tilt).col(2);
    dg.col(j).head<3>() = ddir;
    dg.col(j).tail<3>() = (skew(r.position_in_body) + r.spin_sign * model.c_f_tau() * Mat3::Identity()) * ddir;
  }
  return dg;
}

inline Wrench body_wrench(const VehicleModel & model, const Vec & forces, std::optional<double> tilt = {})
{
  if (forces.size() != model.rotor_count()) { throw std::invalid_argument("forces dimension mismatch"); }
  return allocation_matrix(model, tilt) * forces;
}

namespace detail {

inline void check_guard(const Vec3 & eta, double margin)
{
  if (!euler::within_guard(eta, margin)) {
    throw DomainError("pitch angle too close to the Euler singularity");
  }
}

inline void check_dims(const VehicleModel & model, const Vec & x, const Vec & u)
{
  const auto l = model.layout();
  if (x.size() != l.state_dim() || u.size() != l.input_dim()) {
    throw std::invalid_argument("state/input dimension mismatch");
  }
}

}  // namespace detail

/**
 * @brief Continuous dynamics x_dot = f(x, u) on stacked vectors.
 *
 * Throws DomainError when |theta| >= pi/2 - margin.
 */
inline Vec continuous_dynamics(
  const VehicleModel & model, const Vec & x, const Vec & u, const ExternalWrench & ext = {},
  double margin = euler::kDefaultSingularityMargin)
{
  detail::check_dims(model, x, u);
  const auto l = model.layout();
  const int n = l.rotors;
  const Vec3 eta = x.segment<3>(StateLayout::kEta);
  const Vec3 omega = x.segment<3>(StateLayout::kOmega);
  detail::check_guard(eta, margin);

  std::optional<double> tilt;
  if (l.tilt) { tilt = x(l.tilt_index()); }
  const Wrench w = allocation_matrix(model, tilt) * x.segment(StateLayout::kForces, n);
  const Mat3 & j = model.inertia();

  Vec dx(l.state_dim());
  dx.segment<3>(StateLayout::kPos) = x.segment<3>(StateLayout::kVel);
  dx.segment<3>(StateLayout::kVel) = -model.gravity() * Vec3::UnitZ()
                                     + (euler::rotation(eta) * w.head<3>() + ext.force_world) / model.mass();
  dx.segment<3>(StateLayout::kEta) = euler::body_to_rates(eta) * omega;
  dx.segment<3>(StateLayout::kOmega) =
    model.inertia_inverse() * (-omega.cross(j * omega) + w.tail<3>() + ext.torque_body);
  dx.segment(StateLayout::kForces, n) = u.head(n);
  if (l.tilt) { dx(l.tilt_index()) = u(l.tilt_rate_index()); }
  return dx;
}

inline Vec continuous_dynamics(const VehicleModel & model, const FullState & x, const ControlInput & u)
{
  return continuous_dynamics(model, x.to_vector(), u.to_vector());
}

/// Analytic Jacobians df/dx and df/du of continuous_dynamics (no external wrench dependence).
inline void dynamics_jacobian(
  const VehicleModel & model, const Vec & x, const Vec & /*u*/, Mat & fx, Mat & fu,
  double margin = euler::kDefaultSingularityMargin)
{
  const auto l = model.layout();
  const int n = l.rotors;
  const int nx = l.state_dim(), nu = l.input_dim();
  const Vec3 eta = x.segment<3>(StateLayout::kEta);
  const Vec3 omega = x.segment<3>(StateLayout::kOmega);
  detail::check_guard(eta, margin);

  std::optional<double> tilt;
  if (l.tilt) { tilt = x(l.tilt_index()); }
  const AllocationMatrix g = allocation_matrix(model, tilt);
  const Vec gamma = x.segment(StateLayout::kForces, n);
  const Vec3 f_body = g.topRows<3>() * gamma;
  const Mat3 r = euler::rotation(eta);
  const auto dr = euler::rotation_partials(eta);
  const Mat3 & j = model.inertia();
  const Mat3 & jinv = model.inertia_inverse();
  const double inv_m = 1.0 / model.mass();

  fx.setZero(nx, nx);
  fu.setZero(nx, nu);
  fx.block<3, 3>(StateLayout::kPos, StateLayout::kVel).setIdentity();
  for (int k = 0; k < 3; ++k) {
    fx.block<3, 1>(StateLayout::kVel, StateLayout::kEta + k) = inv_m * dr[k] * f_body;
  }
  fx.block(StateLayout::kVel, StateLayout::kForces, 3, n) = inv_m * r * g.topRows<3>();
  fx.block<3, 3>(StateLayout::kEta, StateLayout::kEta) = euler::body_to_rates_jacobian(eta, omega);
  fx.block<3, 3>(StateLayout::kEta, StateLayout::kOmega) = euler::body_to_rates(eta);
  fx.block<3, 3>(StateLayout::kOmega, StateLayout::kOmega) = jinv * (skew(j * omega) - skew(omega) * j);
  fx.block(StateLayout::kOmega, StateLayout::kForces, 3, n) = jinv * g.bottomRows<3>();
  if (l.tilt) {
    const AllocationMatrix dg = allocation_tilt_derivative(model, *tilt);
    const Wrench dw = dg * gamma;
    fx.block<3, 1>(StateLayout::kVel, l.tilt_index()) = inv_m * r * dw.head<3>();
    fx.block<3, 1>(StateLayout::kOmega, l.tilt_index()) = jinv * dw.tail<3>();
    fu(l.tilt_index(), l.tilt_rate_index()) = 1.0;
  }
  fu.block(StateLayout::kForces, 0, n, n).setIdentity();
}

/// Output map y = h(x, u); energy term sum(f_i^2) appended when requested.
inline Vec output_vector(const VehicleModel & model, const Vec & x, const Vec & u, bool with_energy)
{
  const Vec dx = continuous_dynamics(model, x, u);
  const int n = model.rotor_count();
  Vec y(18 + (with_energy ? 1 : 0));
  y << x.segment<3>(StateLayout::kPos), x.segment<3>(StateLayout::kVel), dx.segment<3>(StateLayout::kVel),
    x.segment<3>(StateLayout::kEta), x.segment<3>(StateLayout::kOmega), dx.segment<3>(StateLayout::kOmega);
  if (with_energy) { y(18) = x.segment(StateLayout::kForces, n).squaredNorm(); }
  return y;
}

inline OutputVector output_map(const VehicleModel & model, const FullState & x, const ControlInput & u, bool with_energy)
{
  const Vec y = output_vector(model, x.to_vector(), u.to_vector(), with_energy);
  OutputVector out;
  out.position = y.segment<3>(0);
  out.velocity = y.segment<3>(3);
  out.linear_acceleration = y.segment<3>(6);
  out.euler = y.segment<3>(9);
  out.body_rates = y.segment<3>(12);
  out.angular_acceleration = y.segment<3>(15);
  if (with_energy) { out.energy_cost = y(18); }
  return out;
}

/// dh/dx, dh/du built from the dynamics Jacobian.
inline void output_jacobian(const VehicleModel & model, const Vec & x, const Vec & u, bool with_energy, Mat & cx, Mat & du)
{
  Mat fx, fu;
  dynamics_jacobian(model, x, u, fx, fu);
  const int nx = static_cast<int>(x.size()), nu = static_cast<int>(u.size());
  const int n = model.rotor_count();
  cx.setZero(18 + (with_energy ? 1 : 0), nx);
  du.setZero(cx.rows(), nu);
  cx.block(0, 0, 6, 6).setIdentity();
  cx.block(6, 0, 3, nx) = fx.middleRows(StateLayout::kVel, 3);
  cx.block(9, StateLayout::kEta, 6, 6).setIdentity();
  cx.block(15, 0, 3, nx) = fx.middleRows(StateLayout::kOmega, 3);
  du.middleRows(6, 3) = fu.middleRows(StateLayout::kVel, 3);
  du.middleRows(15, 3) = fu.middleRows(StateLayout::kOmega, 3);
  if (with_energy) { cx.block(18, StateLayout::kForces, 1, n) = 2.0 * x.segment(StateLayout::kForces, n).transpose(); }
}

/// Classical RK4 step with zero-order hold on u.
inline Vec rk4_step(
  const VehicleModel & model, const Vec & x, const Vec & u, double dt, const ExternalWrench & ext = {},
  double margin = euler::kDefaultSingularityMargin)
{
  if (!(dt > 0.0)) { throw std::invalid_argument("rk4 step must be positive"); }
  const Vec k1 = continuous_dynamics(model, x, u, ext, margin);
  const Vec k2 = continuous_dynamics(model, x + 0.5 * dt * k1, u, ext, margin);
  const Vec k3 = continuous_dynamics(model, x + 0.5 * dt * k2, u, ext, margin);
  const Vec k4 = continuous_dynamics(model, x + dt * k3, u, ext, margin);
  return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

inline FullState rk4_step(const VehicleModel & model, const FullState & x, const ControlInput & u, double dt)
{
  return FullState::from_vector(rk4_step(model, x.to_vector(), u.to_vector(), dt), model.layout());
}

/// Forces producing the hover wrench (least-squares, pseudo-inverse of G).
inline Vec hover_forces(const VehicleModel & model, std::optional<double> tilt = {})
{
  const AllocationMatrix g = allocation_matrix(model, tilt);
  Wrench w = Wrench::Zero();
  w(2) = model.mass() * model.gravity();
  return g.completeOrthogonalDecomposition().solve(w);
}

}  // namespace mrav
