#pragma once

// Built-in scenarios. presets/scenarios/*.json describe the same runs.

#include "presets.hpp"
#include "sim.hpp"

namespace mrav::scenarios {

inline constexpr double kChirpAmplitude = 1.2;
inline constexpr double kChirpSlope = 0.025;
inline constexpr double kChirpTbar = 44.84;
inline constexpr double kStepPeriod = 3.0;

inline Weights quadrotor_weights()
{
  Weights w;
  w.stage.p = Vec3(500, 300, 300);
  w.stage.v = Vec3::Constant(1.9);
  w.stage.eta = Vec3(0.1, 0.1, 40);
  w.stage.omega = Vec3::Constant(0.15);
  return w;
}

inline Weights tilthex_weights()
{
  Weights w;
  w.stage.p = Vec3(500, 200, 200);
  w.stage.v = Vec3(25, 20, 20);
  w.stage.eta = Vec3(10, 6, 10);
  w.stage.omega = Vec3::Constant(0.5);
  w.stage.acc = Vec3::Constant(0.01);
  return w;
}

inline Weights fasthex_weights()
{
  Weights w;
  w.stage.p = Vec3::Constant(50);
  w.stage.v = Vec3::Constant(0.5);
  w.stage.eta = Vec3::Constant(15);
  w.stage.omega = Vec3::Constant(0.01);
  w.stage.acc = Vec3::Constant(1e-4);
  w.stage.energy = 0.0005;
  return w;
}

inline Weights failed_weights()
{
  Weights w;
  w.stage.p = Vec3::Constant(10);
  w.stage.v = Vec3::Constant(0.5);
  w.stage.eta = Vec3::Constant(1.5);
  w.stage.omega = Vec3::Constant(5e-4);
  return w;
}

/// Noise of the two hexarotor simulations; sigma taken as the white input
/// at the plant rate (see README).
inline NoiseSpec flight_noise()
{
  NoiseSpec n;
  n.sigma_p = Vec3::Constant(std::sqrt(0.005));
  n.sigma_v = Vec3::Constant(std::sqrt(0.02));
  n.sigma_eta = Vec3::Constant(1.0 * kDegToRad);
  n.sigma_omega = Vec3(std::sqrt(0.15), std::sqrt(0.15), std::sqrt(0.05)) * kDegToRad;
  n.cutoff = 25.0;
  n.convention = NoiseSpec::Convention::white;
  return n;
}

inline Scenario quadrotor_chirp()
{
  Scenario s;
  s.name = "quadrotor_chirp";
  s.vehicle = presets::quadrotor();
  s.actuator = presets::setup_two();
  s.weights = quadrotor_weights();
  s.reference = Reference::chirp(kChirpAmplitude, kChirpSlope, kChirpTbar);
  s.duration = 2.0 * kChirpTbar;
  return s;
}

inline Scenario tilthex_chirp()
{
  Scenario s;
  s.name = "tilthex_chirp";
  s.vehicle = presets::tilthex();
  s.actuator = presets::setup_one();
  s.weights = tilthex_weights();
  s.reference = Reference::chirp(kChirpAmplitude, kChirpSlope, kChirpTbar);
  s.duration = 2.0 * kChirpTbar;
  return s;
}

inline RhoSchedule default_rho() { return {0.125, 0.125, 1.75, 2}; }

inline Scenario quadrotor_steps()
{
  Scenario s;
  s.name = "quadrotor_steps";
  s.vehicle = presets::quadrotor();
  s.actuator = presets::setup_two();
  s.weights = quadrotor_weights();
  s.reference = Reference::step(Vec3::Zero(), Vec3(-0.5, 0.2, 0.2), kStepPeriod);
  s.rho = default_rho();
  s.duration = 90.0;
  return s;
}

inline Scenario tilthex_steps()
{
  Scenario s;
  s.name = "tilthex_steps";
  s.vehicle = presets::tilthex();
  s.actuator = presets::setup_one();
  s.weights = tilthex_weights();
  s.reference = Reference::step(Vec3::Zero(), Vec3(-0.5, 0.3, 0.2), kStepPeriod);
  s.rho = default_rho();
  s.duration = 90.0;
  return s;
}

/// Hover with a triangular lateral push; alpha regulated unless fixed_tilt is set.
inline Scenario fasthex_hover(std::optional<double> fixed_tilt = {})
{
  Scenario s;
  s.name = fixed_tilt ? "fasthex_hover_fixed" : "fasthex_hover";
  s.vehicle = presets::fasthex();
  s.actuator = presets::setup_one();
  s.weights = fasthex_weights();
  s.reference = Reference::hover(Vec3(0.6, 0.6, 0.75));
  s.horizon.energy_output = true;
  s.fixed_tilt = fixed_tilt;
  s.noise = flight_noise();
  s.disturbance.kind = Disturbance::Kind::triangular_force;
  s.disturbance.direction = Vec3(std::cos(kPi / 3), std::sin(kPi / 3), 0.0);
  s.disturbance.peak = 3.0;
  s.disturbance.t1 = 10.0;
  s.disturbance.t2 = 20.0;
  s.duration = 30.0;
  return s;
}

/// Tilt-Hex without rotor 6; rotor 3 may switch off (f_lo = 0).
inline Scenario tilthex_failure(double beta_deg)
{
  Scenario s;
  s.name = "tilthex_failure";
  s.vehicle = presets::tilthex_failed(beta_deg * kDegToRad);
  s.actuator = presets::setup_one();
  s.actuator.allow_switch_off = true;
  s.weights = failed_weights();
  s.reference = Reference::hover(Vec3(0.0, 0.0, 0.75));
  s.noise = flight_noise();
  s.disturbance.kind = Disturbance::Kind::constant_body_torque;
  s.disturbance.torque = Vec3(0.68, 0.39, 0.62) / 250.0;
  s.disturbance.t_on = 5.0;
  s.duration = 30.0;
  return s;
}

}  // namespace mrav::scenarios
