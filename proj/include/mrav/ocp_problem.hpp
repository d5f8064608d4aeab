#pragma once

// Discretized optimal control problem handed to the RTI solver:
//
//   min  sum_{h<N} |y_h - yr_h|_Q^2 + |u_h|_R^2 + |y_N - yr_N|_QN^2 + slack cost
//   s.t. x_0 = x_k,  x_{h+1} = phi(x_h, u_h),  u_lo_h <= u_h <= u_hi_h,
//        lo <= x_h[i] <= hi  (h = 1..N, softened with one slack per node)

#include "types.hpp"

#include <vector>

namespace mrav {

struct StateBox
{
  int index = 0;
  double lo = 0.0;
  double hi = 0.0;
  bool soft = true;
};

struct OcpProblem
{
  int horizon_steps = 10;
  double step = 0.1;
  Vec x0;
  std::vector<Vec> y_ref;
  Vec q_stage;
  Vec q_terminal;
  Vec r_input;
  std::vector<Vec> u_lo;
  std::vector<Vec> u_hi;
  std::vector<StateBox> state_boxes;
  double slack_penalty = 1e4;

  double horizon_time() const { return horizon_steps * step; }
  int node_count() const { return horizon_steps + 1; }

  bool has_soft_boxes() const
  {
    for (const auto & b : state_boxes) {
      if (b.soft) { return true; }
    }
    return false;
  }

  void validate(int nx, int nu, int ny) const
  {
    if (horizon_steps < 1) { throw ConfigError("horizon needs N >= 1"); }
    if (!(step > 0.0)) { throw ConfigError("shooting step must be positive"); }
    if (x0.size() != nx) { throw ConfigError("initial state has wrong dimension"); }
    if (static_cast<int>(y_ref.size()) != horizon_steps + 1) { throw ConfigError("need N+1 reference samples"); }
    for (const auto & y : y_ref) {
      if (y.size() != ny) { throw ConfigError("reference sample has wrong dimension"); }
    }
    if (q_stage.size() != ny || q_terminal.size() != ny || r_input.size() != nu) {
      throw ConfigError("weight vector has wrong dimension");
    }
    if ((q_stage.array() < 0).any() || (q_terminal.array() < 0).any() || (r_input.array() < 0).any()) {
      throw ConfigError("weights must be nonnegative");
    }
    if (static_cast<int>(u_lo.size()) != horizon_steps || static_cast<int>(u_hi.size()) != horizon_steps) {
      throw ConfigError("need N input bound vectors");
    }
    for (int h = 0; h < horizon_steps; ++h) {
      if (u_lo[h].size() != nu || u_hi[h].size() != nu || (u_lo[h].array() > u_hi[h].array()).any()) {
        throw ConfigError("inconsistent input bounds");
      }
    }
    for (const auto & b : state_boxes) {
      if (b.index < 0 || b.index >= nx || b.lo > b.hi) { throw ConfigError("inconsistent state box"); }
    }
    if (!(slack_penalty > 0.0)) { throw ConfigError("slack penalty must be positive"); }
  }
};

}  // namespace mrav
