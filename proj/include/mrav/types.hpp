#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace mrav {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Wrench = Eigen::Matrix<double, 6, 1>;
using AllocationMatrix = Eigen::Matrix<double, 6, Eigen::Dynamic>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kDegToRad = kPi / 180.0;
inline constexpr double kRadToDeg = 180.0 / kPi;

/// Raised when a vehicle/actuator/scenario description is inconsistent.
class ConfigError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Raised when a state leaves the domain where the model is defined
/// (Euler singularity, negative rotor speed, ...).
class DomainError : public std::domain_error
{
public:
  using std::domain_error::domain_error;
};

/// Raised by the offline identification pipelines.
class IdentificationError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

inline Mat3 skew(const Vec3 & v)
{
  Mat3 s;
  s << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return s;
}

inline Vec3 vee(const Mat3 & s)
{
  return Vec3(0.5 * (s(2, 1) - s(1, 2)), 0.5 * (s(0, 2) - s(2, 0)), 0.5 * (s(1, 0) - s(0, 1)));
}

inline Mat3 rot_x(double a)
{
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << 1, 0, 0, 0, c, -s, 0, s, c;
  return r;
}

inline Mat3 rot_y(double a)
{
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << c, 0, s, 0, 1, 0, -s, 0, c;
  return r;
}

inline Mat3 rot_z(double a)
{
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << c, -s, 0, s, c, 0, 0, 0, 1;
  return r;
}

/// Wrap an angle to (-pi, pi].
inline double wrap_angle(double a)
{
  a = std::remainder(a, 2.0 * kPi);
  return a <= -kPi ? a + 2.0 * kPi : a;
}

}  // namespace mrav
