#pragma once

// Quadratic thrust model f = c_f * w^2 and the speed/acceleration limits of
// the propeller-motor units, translated into bounds on f and f_dot.

#include "types.hpp"

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

namespace mrav {

/// Rotor acceleration limits identified on a grid of speed set-points [Hz, Hz/s].
struct AccelLimitTable
{
  std::vector<double> speeds;
  std::vector<double> accel_lo;
  std::vector<double> accel_hi;

  void validate() const
  {
    if (speeds.size() < 2) { throw ConfigError("acceleration table needs at least two rows"); }
    if (accel_lo.size() != speeds.size() || accel_hi.size() != speeds.size()) {
      throw ConfigError("acceleration table columns have different lengths");
    }
    for (std::size_t i = 0; i < speeds.size(); ++i) {
      if (i > 0 && !(speeds[i] > speeds[i - 1])) { throw ConfigError("table speeds must be strictly increasing"); }
      if (!(accel_lo[i] < 0.0) || !(accel_hi[i] > 0.0)) {
        throw ConfigError("table needs accel_lo < 0 < accel_hi in every row");
      }
    }
  }

  /// Linear interpolation, flat beyond the grid ends. Returns (lo, hi).
  std::pair<double, double> at(double w) const
  {
    if (w <= speeds.front()) { return {accel_lo.front(), accel_hi.front()}; }
    if (w >= speeds.back()) { return {accel_lo.back(), accel_hi.back()}; }
    const auto it = std::upper_bound(speeds.begin(), speeds.end(), w);
    const std::size_t i = static_cast<std::size_t>(it - speeds.begin());
    const double s = (w - speeds[i - 1]) / (speeds[i] - speeds[i - 1]);
    return {accel_lo[i - 1] + s * (accel_lo[i] - accel_lo[i - 1]), accel_hi[i - 1] + s * (accel_hi[i] - accel_hi[i - 1])};
  }
};

struct ActuatorModel
{
  double c_f = 1.0;
  double speed_lo = 0.0;
  double speed_hi = 1.0;
  AccelLimitTable accel_table;
  double rate_scale = 1.0;
  /// Failed-rotor mode: the lower force bound drops to 0 N.
  bool allow_switch_off = false;

  void validate() const
  {
    if (!(c_f > 0.0)) { throw ConfigError("actuator c_f must be positive"); }
    if (!(speed_lo > 0.0) || !(speed_hi > speed_lo)) { throw ConfigError("need 0 < speed_lo < speed_hi"); }
    if (!(rate_scale > 0.0)) { throw ConfigError("rate scale must be positive"); }
    accel_table.validate();
  }
};

inline double thrust_from_speed(const ActuatorModel & m, double w)
{
  if (w < 0.0) { throw DomainError("negative rotor speed"); }
  return m.c_f * w * w;
}

inline double speed_from_thrust(const ActuatorModel & m, double f)
{
  if (f < 0.0) { throw DomainError("negative rotor thrust"); }
  return std::sqrt(f / m.c_f);
}

/// (f_lo, f_hi) in N.
inline std::pair<double, double> force_bounds(const ActuatorModel & m)
{
  const double hi = m.c_f * m.speed_hi * m.speed_hi;
  return {m.allow_switch_off ? 0.0 : m.c_f * m.speed_lo * m.speed_lo, hi};
}

/**
 * @brief (f_dot_lo, f_dot_hi) in N/s at thrust f.
 *
 * f outside the force bounds is clamped and reported through @p clamped.
 * The speed entering 2 c_f w w_dot is kept inside [speed_lo, speed_hi] so the
 * bounds stay strictly signed even for a rotor allowed to stop.
 */
inline std::pair<double, double> force_rate_bounds(const ActuatorModel & m, double f, bool * clamped = nullptr)
{
  const auto [f_lo, f_hi] = force_bounds(m);
  const double fc = std::clamp(f, f_lo, f_hi);
  if (clamped) { *clamped = (fc != f); }
  const double w = std::clamp(std::sqrt(fc / m.c_f), m.speed_lo, m.speed_hi);
  const auto [a_lo, a_hi] = m.accel_table.at(w);
  const double k = m.rate_scale * 2.0 * m.c_f * w;
  return {k * a_lo, k * a_hi};
}

}  // namespace mrav
