#pragma once

// Built-in vehicle and actuator descriptions. The JSON files under presets/
// carry the same numbers and are checked against these in the tests.

#include "actuator.hpp"
#include "dynamics.hpp"

namespace mrav::presets {

inline int alternating(int i_one_based, int offset)
{
  return ((i_one_based + offset) % 2 == 0) ? 1 : -1;
}

/// Star-shaped multi-rotor: rotor i on arm (i-1)*2pi/n, R = Rz Rx(alpha_i) Ry(beta).
inline std::vector<RotorGeometry> star(int n, double arm, const std::vector<double> & alpha, double beta, const std::vector<int> & spin)
{
  std::vector<RotorGeometry> r;
  for (int i = 0; i < n; ++i) {
    r.push_back(RotorGeometry::on_arm(i * 2.0 * kPi / n, arm, alpha[i], beta, spin[i]));
  }
  return r;
}

inline VehicleModel quadrotor()
{
  std::vector<int> spin;
  for (int i = 1; i <= 4; ++i) { spin.push_back(alternating(i, 1)); }  // (-1)^(i-1)
  return VehicleModel(1.042, 0.015 * Mat3::Identity(), 9.81, star(4, 0.23, std::vector<double>(4, 0.0), 0.0, spin), 5.95e-4, 1.69e-2);
}

inline VehicleModel tilthex()
{
  std::vector<int> spin;
  std::vector<double> alpha;
  for (int i = 1; i <= 6; ++i) {
    spin.push_back(alternating(i, 1));                     // (-1)^(i-1)
    alpha.push_back(alternating(i, 0) * 35.0 * kDegToRad);  // (-1)^i 35 deg
  }
  return VehicleModel(
    1.86, Eigen::Vector3d(0.11, 0.11, 0.19).asDiagonal(), 9.81, star(6, 0.368, alpha, -25.0 * kDegToRad, spin), 9.9e-4, 1.9e-2);
}

inline VehicleModel fasthex()
{
  std::vector<RotorGeometry> rotors;
  for (int i = 1; i <= 6; ++i) {
    rotors.push_back(RotorGeometry::tiltable_on_arm(
      (i - 1) * kPi / 3.0, 0.315, alternating(i, 1), 0.0, alternating(i, 0)));  // alpha_i = (-1)^(i-1) a, c_i = (-1)^i
  }
  VehicleModel m(2.4, Eigen::Vector3d(0.042, 0.042, 0.083).asDiagonal(), 9.81, rotors, 9.9e-4, 1.9e-2);
  m.set_tilt_limits(TiltLimits{});
  return m;
}

/// Tilt-Hex with rotor 6 lost; spin signs follow c_i = (-1)^i.
inline VehicleModel tilthex_failed(double beta_rad)
{
  std::vector<int> spin;
  std::vector<double> alpha;
  for (int i = 1; i <= 6; ++i) {
    spin.push_back(alternating(i, 0));
    alpha.push_back(alternating(i, 0) * 35.0 * kDegToRad);
  }
  VehicleModel full(1.86, Eigen::Vector3d(0.11, 0.11, 0.19).asDiagonal(), 9.81, star(6, 0.368, alpha, beta_rad, spin), 9.9e-4, 1.9e-2);
  return full.without_rotor(5);
}

inline AccelLimitTable setup_one_table()
{
  AccelLimitTable t;
  t.speeds = {30, 40, 50, 60, 70, 80, 90};
  t.accel_lo = {-120, -160, -200, -140, -160, -160, -140};
  t.accel_hi = {200, 200, 200, 160, 180, 180, 180};
  return t;
}

inline ActuatorModel setup_one()
{
  ActuatorModel a;
  a.c_f = 9.9e-4;
  a.speed_lo = 16.0;
  a.speed_hi = 102.0;
  a.accel_table = setup_one_table();
  a.validate();
  return a;
}

/// Quadrotor motor (setup II). Only c_f is known; the table is the output of
/// extract_accel_limits on ident::setup_two_bench() over the 30..90 Hz plan.
inline AccelLimitTable setup_two_table()
{
  AccelLimitTable t;
  t.speeds = {30, 40, 50, 60, 70, 80, 90};
  t.accel_lo = {-120, -150, -170, -180, -190, -190, -180};
  t.accel_hi = {220, 220, 220, 210, 210, 200, 190};
  return t;
}

inline ActuatorModel setup_two()
{
  ActuatorModel a;
  a.c_f = 5.95e-4;
  a.speed_lo = 16.0;
  a.speed_hi = 110.0;
  a.accel_table = setup_two_table();
  a.validate();
  return a;
}

}  // namespace mrav::presets
