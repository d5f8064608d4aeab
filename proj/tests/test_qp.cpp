#include <mrav/qp.hpp>
#include <mrav/qp_io.hpp>

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace mrav;
using namespace mrav::qp;
using namespace mrav::oracle;

TEST(Qp, ScalarUpperBound)
{
  // min (z-1)^2 s.t. z <= 0.5
  DenseQp q = DenseQp::unconstrained(Mat::Constant(1, 1, 2.0), Vec::Constant(1, -2.0));
  q.ub(0) = 0.5;
  const auto r = solve(q);
  ASSERT_EQ(r.status, QpStatus::optimal);
  EXPECT_NEAR(r.z(0), 0.5, 1e-12);
  EXPECT_NEAR(std::abs(r.bound_multipliers(0)), 1.0, 1e-12);
  ASSERT_EQ(r.active.size(), 1u);
  EXPECT_NEAR(r.active[0].multiplier, 1.0, 1e-12);
  EXPECT_TRUE(r.active[0].upper);
}

TEST(Qp, Unconstrained)
{
  const DenseQp q = DenseQp::unconstrained(2.0 * Mat::Identity(2, 2), Eigen::Vector2d(-2.0, -4.0));
  const auto r = solve(q);
  ASSERT_EQ(r.status, QpStatus::optimal);
  EXPECT_NEAR(r.z(0), 1.0, 1e-12);
  EXPECT_NEAR(r.z(1), 2.0, 1e-12);
  EXPECT_EQ(r.iterations, 0);
}

TEST(Qp, MatchesEnumerationOnRandomBoxQps)
{
  std::mt19937 rng(12345);
  for (int t = 0; t < 100; ++t) {
    const DenseQp q = random_box_qp(rng, 6);
    const Vec ref = enumerate_box_qp(q);
    ASSERT_EQ(ref.size(), 6);
    const auto r = solve(q);
    ASSERT_EQ(r.status, QpStatus::optimal);
    EXPECT_LT((r.z - ref).cwiseAbs().maxCoeff(), 1e-8) << "instance " << t;
    const auto k = kkt_residuals(q, r);
    EXPECT_LT(k.stationarity, 1e-8 * (1.0 + q.gradient.norm()));
    EXPECT_LT(k.complementarity, 1e-8);
    EXPECT_LT(k.dual, 1e-8);
  }
}

TEST(Qp, GeneralRowsAndPhaseOne)
{
  // min ||z||^2 s.t. z0 + z1 >= 1, z0 - z1 <= -0.5, z within [-2,2]
  DenseQp q = DenseQp::unconstrained(2.0 * Mat::Identity(2, 2), Vec::Zero(2));
  q.lb.setConstant(-2.0);
  q.ub.setConstant(2.0);
  q.rows.resize(2, 2);
  q.rows << 1, 1, 1, -1;
  q.row_lb = Eigen::Vector2d(1.0, -kInf);
  q.row_ub = Eigen::Vector2d(kInf, -0.5);
  const auto r = solve(q);
  ASSERT_EQ(r.status, QpStatus::optimal);
  EXPECT_NEAR(r.z(0), 0.25, 1e-12);
  EXPECT_NEAR(r.z(1), 0.75, 1e-12);
  const auto k = kkt_residuals(q, r);
  EXPECT_LT(k.stationarity, 1e-10);
  EXPECT_LT(k.primal, 1e-10);
}

TEST(Qp, InfeasibleRowsReported)
{
  DenseQp q = DenseQp::unconstrained(Mat::Identity(2, 2), Vec::Zero(2));
  q.lb.setConstant(0.0);
  q.ub.setConstant(1.0);
  q.rows.resize(1, 2);
  q.rows << 1, 1;
  q.row_lb = Vec::Constant(1, 3.0);
  q.row_ub = Vec::Constant(1, kInf);
  EXPECT_EQ(solve(q).status, QpStatus::infeasible);
}

TEST(Qp, WarmStartIdempotent)
{
  std::mt19937 rng(7);
  for (int t = 0; t < 20; ++t) {
    DenseQp q = random_box_qp(rng, 8);
    q.rows = Mat::Ones(1, 8);
    q.row_lb = Vec::Constant(1, -1.0);
    q.row_ub = Vec::Constant(1, 1.0);
    const auto cold = solve(q);
    ASSERT_EQ(cold.status, QpStatus::optimal);
    const auto warm = solve(q, cold.active);
    ASSERT_EQ(warm.status, QpStatus::optimal);
    EXPECT_EQ(warm.iterations, 0);
    EXPECT_LT((warm.z - cold.z).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Qp, ObjectiveDecreasesMonotonically)
{
  std::mt19937 rng(99);
  QpOptions opt;
  opt.record_objective = true;
  for (int t = 0; t < 20; ++t) {
    const DenseQp q = random_box_qp(rng, 10);
    const auto r = solve(q, {}, opt);
    for (std::size_t i = 1; i < r.objective_trace.size(); ++i) {
      EXPECT_LE(r.objective_trace[i], r.objective_trace[i - 1] + 1e-10);
    }
  }
}

TEST(Qp, IterationCapReportsMaxIter)
{
  std::mt19937 rng(3);
  const DenseQp q = random_box_qp(rng, 10);
  QpOptions opt;
  opt.max_iterations = 0;
  const auto full = solve(q);
  if (full.iterations > 0) { EXPECT_EQ(solve(q, {}, opt).status, QpStatus::max_iter); }
}

TEST(Qp, Deterministic)
{
  std::mt19937 rng(5);
  const DenseQp q = random_box_qp(rng, 12);
  const auto a = solve(q), b = solve(q);
  EXPECT_EQ(a.iterations, b.iterations);
  EXPECT_TRUE((a.z.array() == b.z.array()).all());
}

TEST(Qp, JsonDumpRoundTrip)
{
  DenseQp q = DenseQp::unconstrained(2.0 * Mat::Identity(2, 2), Eigen::Vector2d(-2.0, -4.0));
  q.ub(1) = 1.5;
  q.rows = Mat::Ones(1, 2);
  q.row_lb = Vec::Constant(1, -kInf);
  q.row_ub = Vec::Constant(1, 2.0);
  const DenseQp back = load_json(dump_json(q));
  EXPECT_EQ(back.hessian, q.hessian);
  EXPECT_EQ(back.gradient, q.gradient);
  EXPECT_EQ(back.ub(1), 1.5);
  EXPECT_TRUE(std::isinf(back.lb(0)));
  EXPECT_TRUE(std::isinf(back.row_lb(0)));
  EXPECT_EQ(back.row_ub(0), 2.0);
}
