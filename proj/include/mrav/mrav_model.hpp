#pragma once

// VehicleModel seen through the RtiModel interface.

#include "dynamics.hpp"

namespace mrav {

class MravModel
{
public:
  MravModel(VehicleModel vehicle, bool energy_output) : vehicle_(std::move(vehicle)), energy_(energy_output) {}

  const VehicleModel & vehicle() const { return vehicle_; }
  bool energy_output() const { return energy_; }

  int state_dim() const { return vehicle_.layout().state_dim(); }
  int input_dim() const { return vehicle_.layout().input_dim(); }
  int output_dim() const { return 18 + (energy_ ? 1 : 0); }

  Vec dynamics(const Vec & x, const Vec & u) const { return continuous_dynamics(vehicle_, x, u); }
  void dynamics_jacobian(const Vec & x, const Vec & u, Mat & fx, Mat & fu) const
  {
    mrav::dynamics_jacobian(vehicle_, x, u, fx, fu);
  }
  Vec output(const Vec & x, const Vec & u) const { return output_vector(vehicle_, x, u, energy_); }
  void output_jacobian(const Vec & x, const Vec & u, Mat & cx, Mat & du) const
  {
    mrav::output_jacobian(vehicle_, x, u, energy_, cx, du);
  }

private:
  VehicleModel vehicle_;
  bool energy_;
};

}  // namespace mrav
