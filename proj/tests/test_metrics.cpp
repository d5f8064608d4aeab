#include <mrav/csv.hpp>
#include <mrav/metrics.hpp>
#include <mrav/scenarios.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace mrav;

namespace {

SimLog blank_log(int rows, double dt)
{
  SimLog log;
  log.columns = log_columns(presets::tilthex());
  for (int k = 0; k < rows; ++k) {
    std::vector<double> r(log.columns.size(), 0.0);
    r[0] = k * dt;
    log.rows.push_back(r);
  }
  return log;
}

}  // namespace

TEST(Csv, RoundTripIsExact)
{
  const std::vector<std::string> cols = {"t", "a", "b"};
  const std::vector<std::vector<double>> rows = {{0.0, 0.1, -1e-300}, {0.005, 1.0 / 3.0, 6.02214076e23}, {0.01, -0.0, 5e-324}};
  const std::string text = csv::to_string(cols, rows);
  const csv::Table t = csv::parse(text);
  EXPECT_TRUE(t.warnings.empty());
  EXPECT_EQ(t.columns, cols);
  ASSERT_EQ(t.rows.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) {
    for (std::size_t i = 0; i < 3; ++i) { EXPECT_EQ(t.rows[k][i], rows[k][i]); }
  }
  EXPECT_EQ(csv::to_string(t.columns, t.rows), text);
}

TEST(Csv, TruncatedRowWarns)
{
  const csv::Table t = csv::parse("t,a,b\n0,1,2\n0.1,3,4\n0.2,5", "log.csv");
  EXPECT_EQ(t.rows.size(), 2u);
  ASSERT_EQ(t.warnings.size(), 1u);
  EXPECT_NE(t.warnings[0].find("log.csv:4"), std::string::npos) << t.warnings[0];
  const csv::Table u = csv::parse("t,a\n0,x\n", "log.csv");
  EXPECT_EQ(u.rows.size(), 0u);
  EXPECT_EQ(u.warnings.size(), 1u);
}

TEST(Csv, LogReadersCheckColumns)
{
  EXPECT_THROW(csv::speed_log(csv::parse("t,w_des\n0,1\n")), ConfigError);
  const auto log = csv::speed_log(csv::parse("t,w_des,w_meas\n0,1,1\n1,2,2\n2,3,3\n"));
  EXPECT_EQ(log.w_measured[2], 3.0);
}

TEST(Metrics, ZeroErrorLogGivesZeros)
{
  const MetricsReport m = compute_metrics(blank_log(1000, 0.005));
  EXPECT_TRUE(m.warnings.empty());
  EXPECT_EQ(m.rows_used, 800);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(m.e_p_max[i], 0.0);
    EXPECT_EQ(m.e_p_rms[i], 0.0);
    EXPECT_EQ(m.e_eta_max[i], 0.0);
    EXPECT_EQ(m.e_eta_rms[i], 0.0);
  }
  EXPECT_EQ(m.f_min, 0.0);
  EXPECT_EQ(m.f_max, 0.0);
  EXPECT_EQ(m.fdot_max, 0.0);
  EXPECT_EQ(m.solve_time_max, 0.0);
  EXPECT_EQ(m.backup_count, 0);
}

TEST(Metrics, SinusoidRmsIsAmplitudeOverRootTwo)
{
  SimLog log = blank_log(20001, 0.005);
  const int px = log.column("p_x"), pitch = log.column("pitch"), u3 = log.column("u3"), st = log.column("status");
  const double a = 0.07, b = 5.0 * kDegToRad;
  for (auto & r : log.rows) {
    r[px] = a * std::sin(2.0 * kPi * 0.7 * r[0]);
    r[pitch] = b * std::cos(2.0 * kPi * 1.3 * r[0]);
    r[u3] = -2.0;
  }
  log.rows[500][st] = 1.0;
  log.rows[600][st] = 2.0;
  const MetricsReport m = compute_metrics(log);
  EXPECT_NEAR(m.e_p_rms[0] / (a / std::sqrt(2.0)), 1.0, 0.005);
  EXPECT_NEAR(m.e_eta_rms[1] / (5.0 / std::sqrt(2.0)), 1.0, 0.005);
  EXPECT_NEAR(m.e_p_max[0], a, 1e-4);
  EXPECT_LE(m.e_p_rms[0], m.e_p_max[0]);
  EXPECT_EQ(m.fdot_min, -2.0);
  EXPECT_EQ(m.backup_count, 2);
  EXPECT_EQ(m.infeasible_count, 1);
}

TEST(Metrics, AngleErrorIsWrapped)
{
  SimLog log = blank_log(400, 0.005);
  const int yaw = log.column("yaw"), yr = log.column("etar_yaw");
  for (auto & r : log.rows) {
    r[yaw] = kPi - 0.01;
    r[yr] = -kPi + 0.01;
  }
  EXPECT_NEAR(compute_metrics(log).e_eta_max[2], 0.02 * kRadToDeg, 1e-9);
}

TEST(Metrics, WarmupWindow)
{
  const MetricsReport m = compute_metrics(blank_log(100, 0.005), 1.0);
  EXPECT_EQ(m.rows_used, 0);
  EXPECT_EQ(m.warnings.size(), 1u);
  EXPECT_EQ(compute_metrics(blank_log(100, 0.005), 0.0).rows_used, 100);
}

TEST(Metrics, SimulationRoundTripHasNoWarnings)
{
  auto sc = scenarios::quadrotor_chirp();
  sc.duration = 3.0;
  const auto res = run_scenario(sc);
  const csv::Table t = csv::parse(csv::to_string(res.log.columns, res.log.rows));
  EXPECT_TRUE(t.warnings.empty());
  const MetricsReport m = compute_metrics(csv::to_simlog(t));
  EXPECT_TRUE(m.warnings.empty());
  const auto fb = force_bounds(sc.actuator);
  EXPECT_GE(m.f_min, fb.first);
  EXPECT_LE(m.f_max, fb.second);
  EXPECT_LE(m.fdot_min, m.fdot_max);
  EXPECT_GT(m.e_p_max[0], 0.0);
  EXPECT_GT(m.solve_time_mean, 0.0);
}
