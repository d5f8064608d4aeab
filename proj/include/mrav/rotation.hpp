#pragma once

// 3-2-1 (yaw-pitch-roll) Euler angles eta = [phi theta psi],
// R = Rz(psi) Ry(theta) Rx(phi), body rates omega = T(eta) * eta_dot.

#include "types.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace mrav::euler {

/// Pitch values closer than this to +-pi/2 are rejected by the dynamics.
inline constexpr double kDefaultSingularityMargin = 0.087;

inline Mat3 rotation(const Vec3 & eta)
{
  return rot_z(eta.z()) * rot_y(eta.y()) * rot_x(eta.x());
}

/// Partial derivatives dR/dphi, dR/dtheta, dR/dpsi.
inline std::array<Mat3, 3> rotation_partials(const Vec3 & eta)
{
  const Mat3 rx = rot_x(eta.x()), ry = rot_y(eta.y()), rz = rot_z(eta.z());
  return {rz * ry * rx * skew(Vec3::UnitX()),
          rz * ry * skew(Vec3::UnitY()) * rx,
          skew(Vec3::UnitZ()) * rz * ry * rx};
}

/// omega = T(eta) * eta_dot
inline Mat3 rates_to_body(const Vec3 & eta)
{
  const double sf = std::sin(eta.x()), cf = std::cos(eta.x());
  const double st = std::sin(eta.y()), ct = std::cos(eta.y());
  Mat3 t;
  t << 1, 0, -st, 0, cf, sf * ct, 0, -sf, cf * ct;
  return t;
}

/// eta_dot = T(eta)^-1 * omega
inline Mat3 body_to_rates(const Vec3 & eta)
{
  const double sf = std::sin(eta.x()), cf = std::cos(eta.x());
  const double ct = std::cos(eta.y()), tt = std::tan(eta.y());
  Mat3 w;
  w << 1, sf * tt, cf * tt, 0, cf, -sf, 0, sf / ct, cf / ct;
  return w;
}

/// d(T^-1(eta) omega)/d eta, a 3x3 matrix (last column is zero).
inline Mat3 body_to_rates_jacobian(const Vec3 & eta, const Vec3 & omega)
{
  const double sf = std::sin(eta.x()), cf = std::cos(eta.x());
  const double st = std::sin(eta.y()), ct = std::cos(eta.y());
  const double tt = st / ct;
  const double a = sf * omega.y() + cf * omega.z();
  const double b = cf * omega.y() - sf * omega.z();
  Mat3 j = Mat3::Zero();
  j(0, 0) = tt * b;
  j(1, 0) = -a;
  j(2, 0) = b / ct;
  j(0, 1) = a / (ct * ct);
  j(2, 1) = a * st / (ct * ct);
  return j;
}

/// Euler angles of a rotation matrix (inverse of rotation()).
inline Vec3 from_rotation(const Mat3 & r)
{
  const double theta = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  return Vec3(std::atan2(r(2, 1), r(2, 2)), theta, std::atan2(r(1, 0), r(0, 0)));
}

inline bool within_guard(const Vec3 & eta, double margin = kDefaultSingularityMargin)
{
  return std::abs(eta.y()) < 0.5 * kPi - margin;
}

}  // namespace mrav::euler
