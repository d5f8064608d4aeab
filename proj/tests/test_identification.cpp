#include <mrav/identification.hpp>
#include <mrav/presets.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace mrav;
using namespace mrav::ident;

namespace {

RampPlan standard_plan(double rest = 0.2)
{
  RampPlan p = RampPlan::grid(30, 90, 10, 10, 20, 300, 10);
  p.rest = rest;
  return p;
}

SyntheticMotor flat_motor(double limit)
{
  SyntheticMotor m;
  m.limits.speeds = {0, 200};
  m.limits.accel_lo = {-limit, -limit};
  m.limits.accel_hi = {limit, limit};
  return m;
}

AllocationMatrix perturbed(const AllocationMatrix & g, std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  AllocationMatrix p = g;
  for (Eigen::Index i = 0; i < p.size(); ++i) { p(i) += u(rng) * g.cwiseAbs().maxCoeff(); }
  return p;
}

}  // namespace

TEST(RampPlan, StandardGridHasAllSegments)
{
  const auto prof = generate_ramp_plan(standard_plan(), 16, 102);
  EXPECT_EQ(prof.segments.size(), 7u * 2u * 29u);
  for (const auto & s : prof.segments) {
    EXPECT_NEAR(s.t_end - s.t_start, 20.0 / std::abs(s.slope), 1e-12);
  }
  // the command never jumps
  for (std::size_t k = 1; k < prof.w.size(); ++k) { EXPECT_LE(std::abs(prof.w[k] - prof.w[k - 1]), 0.3 + 1e-9); }
}

TEST(RampPlan, SingleRampDuration)
{
  RampPlan p;
  p.setpoints = {50};
  p.slopes = {40};
  p.half_width = 10;
  const auto prof = generate_ramp_plan(p, 16, 102);
  ASSERT_EQ(prof.segments.size(), 2u);
  EXPECT_NEAR(prof.segments[0].t_end - prof.segments[0].t_start, 0.5, 1e-12);
  EXPECT_EQ(prof.segments[1].slope, -40);
}

TEST(RampPlan, RejectsRangeExit)
{
  RampPlan p;
  p.setpoints = {95};
  p.slopes = {100};
  EXPECT_THROW(generate_ramp_plan(p, 16, 102), ConfigError);
  p.setpoints = {50};
  p.slopes = {0};
  EXPECT_THROW(generate_ramp_plan(p, 16, 102), ConfigError);
}

TEST(ForceError, Values)
{
  EXPECT_EQ(force_error(9.9e-4, 70, 70), 0.0);
  EXPECT_NEAR(force_error(9.9e-4, 70, 68), 0.2732, 1e-4);
  EXPECT_NEAR(force_error(9.9e-4, 70, 68), 9.9e-4 * 276.0, 1e-15);
  for (double wd : {20.0, 55.5, 90.0}) {
    for (double w : {18.0, 60.0, 101.0}) { EXPECT_NEAR(force_error(9.9e-4, wd, w), 9.9e-4 * (wd * wd - w * w), 1e-12); }
  }
}

TEST(ZeroPhase, SinusoidBelowCutoff)
{
  const double dt = 1e-3, cutoff = 100.0, om = 5.0;
  std::vector<double> x(20000);
  for (std::size_t k = 0; k < x.size(); ++k) { x[k] = std::sin(om * dt * k); }
  const auto y = zero_phase_lowpass(x, dt, cutoff);
  // fit a sin + b cos on the middle half
  Eigen::Matrix2d a = Eigen::Matrix2d::Zero();
  Eigen::Vector2d b = Eigen::Vector2d::Zero();
  for (std::size_t k = 5000; k < 15000; ++k) {
    const Eigen::Vector2d r(std::sin(om * dt * k), std::cos(om * dt * k));
    a += r * r.transpose();
    b += r * y[k];
  }
  const Eigen::Vector2d c = a.ldlt().solve(b);
  EXPECT_LT(std::abs(std::hypot(c(0), c(1)) - 1.0), 0.01);
  EXPECT_LT(std::abs(std::atan2(c(1), c(0))) * kRadToDeg, 1.0);
  EXPECT_EQ(zero_phase_lowpass(x, dt, 0.0), x);
}

TEST(AccelLimits, RecoversHardLimit)
{
  const auto plan = standard_plan();
  const auto log = flat_motor(150.0).run(generate_ramp_plan(plan, 16, 102));
  const auto t = extract_accel_limits(log, plan, 16, 102, 9.9e-4, synthetic_eps(9.9e-4), 300.0);
  ASSERT_EQ(t.speeds.size(), 7u);
  for (std::size_t h = 0; h < 7; ++h) {
    EXPECT_NEAR(t.accel_hi[h], 150.0, 10.0) << t.speeds[h];
    EXPECT_NEAR(t.accel_lo[h], -150.0, 10.0) << t.speeds[h];
  }
}

TEST(AccelLimits, PerfectTrackingSaturates)
{
  const auto plan = standard_plan(0.05);
  const auto prof = generate_ramp_plan(plan, 16, 102);
  SpeedLog log{prof.t, prof.w, prof.w};
  const auto t = extract_accel_limits(log, plan, 16, 102, 9.9e-4, 0.2, 100.0);
  for (std::size_t h = 0; h < 7; ++h) {
    EXPECT_EQ(t.accel_hi[h], 300.0);
    EXPECT_EQ(t.accel_lo[h], -300.0);
  }
}

TEST(AccelLimits, MonotoneInThreshold)
{
  const auto plan = standard_plan();
  const auto motor = setup_two_bench();
  const auto log = motor.run(generate_ramp_plan(plan, 16, 110));
  AccelLimitTable prev;
  for (double eps : {0.02, 0.03, 0.05, 0.1, 0.2, 0.4}) {
    const auto t = extract_accel_limits(log, plan, 16, 110, 5.95e-4, eps, 300.0);
    if (!prev.speeds.empty()) {
      for (std::size_t h = 0; h < 7; ++h) {
        EXPECT_GE(t.accel_hi[h], prev.accel_hi[h]);
        EXPECT_LE(t.accel_lo[h], prev.accel_lo[h]);
      }
    }
    prev = t;
  }
}

TEST(AccelLimits, FailureNamesSetpoint)
{
  auto plan = standard_plan(0.05);
  plan.setpoints = {30, 40};
  const auto log = flat_motor(10.0).run(generate_ramp_plan(plan, 16, 102));
  try {
    extract_accel_limits(log, plan, 16, 102, 9.9e-4, 0.01, 300.0);
    FAIL() << "expected an identification error";
  } catch (const IdentificationError & e) {
    EXPECT_NE(std::string(e.what()).find("setpoint 30"), std::string::npos) << e.what();
  }
}

TEST(AccelLimits, SetupTwoTableComesFromTheBench)
{
  const auto plan = standard_plan();
  const auto act = presets::setup_two();
  const auto log = setup_two_bench().run(generate_ramp_plan(plan, act.speed_lo, act.speed_hi));
  const auto t = extract_accel_limits(log, plan, act.speed_lo, act.speed_hi, act.c_f, synthetic_eps(act.c_f), 300.0);
  EXPECT_EQ(t.speeds, act.accel_table.speeds);
  EXPECT_EQ(t.accel_lo, act.accel_table.accel_lo);
  EXPECT_EQ(t.accel_hi, act.accel_table.accel_hi);
  // braking limit moves more across setpoints than the acceleration limit
  const auto spread = [](const std::vector<double> & v) { return *std::max_element(v.begin(), v.end()) - *std::min_element(v.begin(), v.end()); };
  EXPECT_GT(spread(t.accel_lo), spread(t.accel_hi));
}

TEST(Allocation, RecoversKnownMatrixFromNoiselessFlight)
{
  auto truth = presets::tilthex();
  const AllocationMatrix g = perturbed(allocation_matrix(truth), 4);
  truth.set_allocation_override(g);
  const auto log = synthetic_flight(truth, presets::tilthex(), {});
  const auto r = identify_allocation(log, presets::tilthex(), 0.0);
  EXPECT_LT((r.g - g).norm() / g.norm(), 1e-6);
}

TEST(Allocation, FixedPoint)
{
  const auto nominal = presets::quadrotor();
  auto truth = nominal;
  const auto first = identify_allocation(synthetic_flight(truth, nominal, {}), nominal, 0.0);
  truth.set_allocation_override(first.g);
  const auto second = identify_allocation(synthetic_flight(truth, nominal, {}), nominal, 0.0);
  EXPECT_LT((second.g - first.g).norm() / first.g.norm(), 1e-6);
}

TEST(Allocation, HoverOnlyIsRankDeficient)
{
  FlightExcitation ex;
  ex.amplitude = 0.0;
  const auto log = synthetic_flight(presets::tilthex(), presets::tilthex(), ex);
  try {
    identify_allocation(log, presets::tilthex(), 0.0);
    FAIL() << "expected an identification error";
  } catch (const IdentificationError & e) {
    EXPECT_NE(std::string(e.what()).find("condition number"), std::string::npos);
  }
}

TEST(Allocation, OnePercentForceNoise)
{
  auto truth = presets::tilthex();
  const AllocationMatrix g = perturbed(allocation_matrix(truth), 9);
  truth.set_allocation_override(g);
  FlightExcitation ex;
  ex.force_noise = 0.01;
  ex.duration = 20.0;
  ex.seed = 3;
  const auto r = identify_allocation(synthetic_flight(truth, presets::tilthex(), ex), presets::tilthex(), 30.0);
  EXPECT_LT((r.g - g).norm() / g.norm(), 0.02);
  const double big = g.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < g.rows(); ++i) {
    for (Eigen::Index k = 0; k < g.cols(); ++k) {
      // relative error for entries that are not near zero, absolute otherwise
      const double scale = std::max(std::abs(g(i, k)), 0.05 * big);
      EXPECT_LT(std::abs(r.g(i, k) - g(i, k)) / scale, 0.05) << i << "," << k;
    }
  }
}

TEST(Allocation, RelativeErrorReport)
{
  AllocationMatrix a(6, 1), b(6, 1);
  a << 1, 2, 0, 4, 5, 6;
  b << 0.5, 2, 1, 4, 5, 3;
  const Mat e = relative_error_percent(a, b);
  EXPECT_NEAR(e(0, 0), 50.0, 1e-12);
  EXPECT_TRUE(std::isnan(e(2, 0)));
  EXPECT_NEAR(e(5, 0), 50.0, 1e-12);
}
