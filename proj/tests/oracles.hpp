#pragma once

// Reference computations that share no code with the solvers they check:
// brute-force KKT enumeration for box QPs, batch least squares for a linear
// OCP, and central differences for the RK4 sensitivities.

#include <mrav/mrav_model.hpp>
#include <mrav/ocp_problem.hpp>
#include <mrav/presets.hpp>
#include <mrav/qp.hpp>
#include <mrav/rti.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace mrav::oracle {

/// Exhaustive enumeration over free / lower / upper patterns of a box QP.
/// Returns the unique KKT point, or an empty vector if none was found.
inline Vec enumerate_box_qp(const qp::DenseQp & q)
{
  const int n = q.num_vars();
  int patterns = 1;
  for (int i = 0; i < n; ++i) { patterns *= 3; }
  for (int code = 0; code < patterns; ++code) {
    std::vector<int> state(n);
    int c = code;
    for (int i = 0; i < n; ++i) {
      state[i] = c % 3;
      c /= 3;
    }
    Vec z = Vec::Zero(n);
    std::vector<int> free;
    for (int i = 0; i < n; ++i) {
      if (state[i] == 0) {
        free.push_back(i);
      } else {
        z(i) = state[i] == 1 ? q.lb(i) : q.ub(i);
      }
    }
    const int nf = static_cast<int>(free.size());
    if (nf > 0) {
      Mat hff(nf, nf);
      Vec rhs(nf);
      for (int a = 0; a < nf; ++a) {
        rhs(a) = -q.gradient(free[a]);
        for (int i = 0; i < n; ++i) {
          if (state[i] != 0) { rhs(a) -= q.hessian(free[a], i) * z(i); }
        }
        for (int b = 0; b < nf; ++b) { hff(a, b) = q.hessian(free[a], free[b]); }
      }
      const Vec zf = hff.ldlt().solve(rhs);
      for (int a = 0; a < nf; ++a) { z(free[a]) = zf(a); }
    }
    const Vec grad = q.hessian * z + q.gradient;
    bool ok = true;
    for (int i = 0; i < n && ok; ++i) {
      if (state[i] == 0) { ok = z(i) >= q.lb(i) - 1e-12 && z(i) <= q.ub(i) + 1e-12; }
      if (state[i] == 1) { ok = grad(i) >= -1e-12; }
      if (state[i] == 2) { ok = grad(i) <= 1e-12; }
    }
    if (ok) { return z; }
  }
  return Vec();
}

inline qp::DenseQp random_box_qp(std::mt19937 & rng, int n)
{
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> ud(0.1, 1.5);
  Mat a(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) { a(i, j) = nd(rng); }
  }
  Mat h = a * a.transpose() + 0.5 * Mat::Identity(n, n);
  Vec g(n);
  for (int i = 0; i < n; ++i) { g(i) = 3.0 * nd(rng); }
  qp::DenseQp q = qp::DenseQp::unconstrained(h, g);
  for (int i = 0; i < n; ++i) {
    q.lb(i) = -ud(rng);
    q.ub(i) = ud(rng);
  }
  return q;
}

/// Worst |z_solver - z_enum| over @p count seeded 6-variable box QPs.
inline double qp_vs_enumeration(int count, unsigned seed)
{
  std::mt19937 rng(seed);
  double worst = 0.0;
  for (int t = 0; t < count; ++t) {
    const qp::DenseQp q = random_box_qp(rng, 6);
    const Vec ref = enumerate_box_qp(q);
    const auto r = qp::solve(q);
    if (ref.size() != 6 || r.status != qp::QpStatus::optimal) { return std::numeric_limits<double>::infinity(); }
    worst = std::max(worst, (r.z - ref).cwiseAbs().maxCoeff());
  }
  return worst;
}

// x = [p, v], u = acceleration; y = [x, u].
struct DoubleIntegrator
{
  int state_dim() const { return 2; }
  int input_dim() const { return 1; }
  int output_dim() const { return 3; }
  Vec dynamics(const Vec & x, const Vec & u) const { return Eigen::Vector2d(x(1), u(0)); }
  void dynamics_jacobian(const Vec &, const Vec &, Mat & fx, Mat & fu) const
  {
    fx = Mat::Zero(2, 2);
    fx(0, 1) = 1.0;
    fu = Mat::Zero(2, 1);
    fu(1, 0) = 1.0;
  }
  Vec output(const Vec & x, const Vec & u) const { return Eigen::Vector3d(x(0), x(1), u(0)); }
  void output_jacobian(const Vec &, const Vec &, Mat & cx, Mat & du) const
  {
    cx = Mat::Zero(3, 2);
    cx(0, 0) = cx(1, 1) = 1.0;
    du = Mat::Zero(3, 1);
    du(2, 0) = 1.0;
  }
};

inline OcpProblem linear_problem(int n, double t, std::mt19937 & rng)
{
  std::normal_distribution<double> nd(0.0, 1.0);
  OcpProblem p;
  p.horizon_steps = n;
  p.step = t;
  p.x0 = Eigen::Vector2d(nd(rng), nd(rng));
  for (int h = 0; h <= n; ++h) { p.y_ref.push_back(Eigen::Vector3d(nd(rng), nd(rng), 0.0)); }
  p.q_stage = Eigen::Vector3d(3.0, 0.5, 0.1);
  p.q_terminal = Eigen::Vector3d(10.0, 2.0, 0.0);
  p.r_input = Vec::Constant(1, 0.05);
  p.u_lo.assign(n, Vec::Constant(1, -1e6));
  p.u_hi.assign(n, Vec::Constant(1, 1e6));
  return p;
}

/// Direct batch least squares over the stacked inputs of a linear_problem.
inline Vec batch_solution(const OcpProblem & p, double levenberg)
{
  const int n = p.horizon_steps;
  const double t = p.step;
  Eigen::Matrix2d a;
  a << 1, t, 0, 1;
  const Eigen::Vector2d b(0.5 * t * t, t);
  std::vector<Mat> rows;
  std::vector<Vec> rhs;
  // state after h steps: a^h x0 + sum_j a^(h-1-j) b u_j
  for (int h = 0; h <= n; ++h) {
    Mat sx = Mat::Zero(2, n);
    Eigen::Matrix2d ap = Eigen::Matrix2d::Identity();
    for (int j = h - 1; j >= 0; --j) {
      sx.col(j) = ap * b;
      ap = ap * a;
    }
    Eigen::Matrix2d ah = Eigen::Matrix2d::Identity();
    for (int k = 0; k < h; ++k) { ah = ah * a; }
    const Vec free = ah * p.x0;
    const Vec & q = h < n ? p.q_stage : p.q_terminal;
    for (int i = 0; i < 2; ++i) {
      rows.push_back(std::sqrt(q(i)) * sx.row(i));
      rhs.push_back(Vec::Constant(1, std::sqrt(q(i)) * (p.y_ref[h](i) - free(i))));
    }
    if (h < n) {
      Mat ru = Mat::Zero(1, n);
      // q2 (u - r)^2 + (R + lev) u^2 up to a constant
      const double wsum = q(2) + p.r_input(0) + levenberg;
      ru(0, h) = std::sqrt(wsum);
      rows.push_back(ru);
      rhs.push_back(Vec::Constant(1, q(2) * p.y_ref[h](2) / std::sqrt(wsum)));
    }
  }
  Mat m(rows.size(), n);
  Vec r(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    m.row(i) = rows[i];
    r(i) = rhs[i](0);
  }
  return m.colPivHouseholderQr().solve(r);
}

/// Worst |u_rti - u_batch| over horizons 1, 3, 10 from random initial guesses.
inline double rti_vs_batch(unsigned seed)
{
  std::mt19937 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  double worst = 0.0;
  for (int n : {1, 3, 10}) {
    const auto p = linear_problem(n, 0.1, rng);
    RtiSolver<DoubleIntegrator> solver(DoubleIntegrator{});
    std::vector<Vec> xg, ug;
    for (int h = 0; h <= n; ++h) { xg.push_back(Eigen::Vector2d(nd(rng), nd(rng))); }
    for (int h = 0; h < n; ++h) { ug.push_back(Vec::Constant(1, nd(rng))); }
    solver.set_guess(xg, ug);
    const auto sol = solver.solve_step(p);
    if (sol.status != SolveStatus::solved) { return std::numeric_limits<double>::infinity(); }
    const Vec ref = batch_solution(p, solver.options().levenberg);
    for (int h = 0; h < n; ++h) { worst = std::max(worst, std::abs(sol.u[h](0) - ref(h))); }
  }
  return worst;
}

/// Worst relative gap between the analytic RK4 sensitivities of the Tilt-Hex
/// and central differences, over @p count random states inside the envelope.
/// Entries are scaled by max(1, |fd|).
inline double sensitivities_vs_fd(int count, unsigned seed)
{
  const MravModel model(presets::tilthex(), false);
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> ang(-0.6, 0.6), rate(-2.0, 2.0), vel(-2.0, 2.0), force(0.5, 9.0), du(-20.0, 20.0);
  double worst = 0.0;
  for (int t = 0; t < count; ++t) {
    Vec x(18), u(6);
    for (int i = 0; i < 3; ++i) {
      x(i) = vel(rng);
      x(3 + i) = vel(rng);
      x(6 + i) = ang(rng);
      x(9 + i) = rate(rng);
    }
    for (int i = 0; i < 6; ++i) {
      x(12 + i) = force(rng);
      u(i) = du(rng);
    }
    const auto s = sensitivities(model, x, u, 0.1, 5);
    const double h = 1e-6;
    Mat fd(18, 24);
    for (int j = 0; j < 24; ++j) {
      Vec xp = x, xm = x, up = u, um = u;
      if (j < 18) {
        xp(j) += h;
        xm(j) -= h;
      } else {
        up(j - 18) += h;
        um(j - 18) -= h;
      }
      fd.col(j) = (sensitivities(model, xp, up, 0.1, 5).next - sensitivities(model, xm, um, 0.1, 5).next) / (2 * h);
    }
    Mat an(18, 24);
    an << s.a, s.b;
    for (int i = 0; i < 18; ++i) {
      for (int j = 0; j < 24; ++j) { worst = std::max(worst, std::abs(an(i, j) - fd(i, j)) / std::max(1.0, std::abs(fd(i, j)))); }
    }
  }
  return worst;
}

}  // namespace mrav::oracle
