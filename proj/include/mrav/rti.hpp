#pragma once

/**
 * @file
 * @brief Real-time iteration NMPC: one Gauss-Newton SQP step per sample on a
 * multiple-shooting grid, condensed to a dense QP in the input increments.
 */

#include "ocp_problem.hpp"
#include "qp.hpp"

#include <chrono>
#include <concepts>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

namespace mrav {

/// Continuous-time model with analytic Jacobians, as consumed by RtiSolver.
template <class M>
concept RtiModel = requires(const M & m, const Vec & x, const Vec & u, Mat & a, Mat & b) {
  { m.state_dim() } -> std::convertible_to<int>;
  { m.input_dim() } -> std::convertible_to<int>;
  { m.output_dim() } -> std::convertible_to<int>;
  { m.dynamics(x, u) } -> std::convertible_to<Vec>;
  m.dynamics_jacobian(x, u, a, b);
  { m.output(x, u) } -> std::convertible_to<Vec>;
  m.output_jacobian(x, u, a, b);
};

struct Sensitivities
{
  Vec next;
  Mat a;
  Mat b;
};

/// RK4 over T with @p substeps steps, and its exact derivatives (variational RK4).
template <RtiModel M>
Sensitivities sensitivities(const M & model, const Vec & x, const Vec & u, double t, int substeps)
{
  if (!(t > 0.0) || substeps < 1) { throw std::invalid_argument("sensitivities: need T > 0 and substeps >= 1"); }
  const int nx = model.state_dim(), nu = model.input_dim();
  const double h = t / substeps;
  Vec xs = x;
  Mat s = Mat::Zero(nx, nx + nu);
  s.leftCols(nx).setIdentity();
  Mat fx, fu;
  auto stage = [&](const Vec & xi, const Mat & si, Vec & k, Mat & dk) {
    k = model.dynamics(xi, u);
    model.dynamics_jacobian(xi, u, fx, fu);
    dk.noalias() = fx * si;
    dk.rightCols(nu) += fu;
  };
  Vec k1, k2, k3, k4;
  Mat d1(nx, nx + nu), d2(nx, nx + nu), d3(nx, nx + nu), d4(nx, nx + nu);
  for (int i = 0; i < substeps; ++i) {
    stage(xs, s, k1, d1);
    stage(xs + 0.5 * h * k1, s + 0.5 * h * d1, k2, d2);
    stage(xs + 0.5 * h * k2, s + 0.5 * h * d2, k3, d3);
    stage(xs + h * k3, s + h * d3, k4, d4);
    xs += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    s += h / 6.0 * (d1 + 2.0 * d2 + 2.0 * d3 + d4);
  }
  return {xs, s.leftCols(nx), s.rightCols(nu)};
}

struct ShootingGrid
{
  std::vector<Vec> x;        // N+1 node states
  std::vector<Vec> u;        // N node inputs
  std::vector<Mat> a, b;     // interval sensitivities
  std::vector<Mat> c, d;     // output Jacobians at the nodes (N+1, terminal uses u_{N-1})
  std::vector<Vec> y;        // outputs at the nodes
  std::vector<Vec> defects;  // phi(x_h, u_h) - x_{h+1}
};

/// Dense QP in z = [du_0 .. du_{N-1}, s_1 .. s_N] plus what is needed to expand it.
struct CondensedQp
{
  qp::DenseQp qp;
  int input_vars = 0;
  int slack_vars = 0;
  std::vector<Vec> c;                     // free response of the state increments
  std::vector<std::vector<Mat>> g;        // g[h][j] = d dx_h / d du_j, j < h
  int rows_per_node = 0;
};

enum class SolveStatus { solved, backup_used, infeasible };

inline const char * to_string(SolveStatus s)
{
  switch (s) {
    case SolveStatus::solved: return "solved";
    case SolveStatus::backup_used: return "backup_used";
    case SolveStatus::infeasible: return "infeasible";
  }
  return "?";
}

struct OcpSolution
{
  std::vector<Vec> x;
  std::vector<Vec> u;
  Vec applied_input;
  int qp_iterations = 0;
  int active_set_size = 0;
  double solve_time = 0.0;
  double slack_max = 0.0;
  double kkt_residual = 0.0;
  SolveStatus status = SolveStatus::solved;
};

struct RtiOptions
{
  int substeps = 5;
  double levenberg = 1e-8;
  /// Fraction of a shooting interval the grid advances between calls (T_ctrl / T).
  double shift_fraction = 1.0;
  qp::QpOptions qp;
};

template <RtiModel M>
class RtiSolver
{
public:
  explicit RtiSolver(M model, RtiOptions options = {}) : model_(std::move(model)), opt_(options) {}

  const M & model() const { return model_; }
  const RtiOptions & options() const { return opt_; }
  bool has_solution() const { return previous_.has_value(); }
  const std::optional<OcpSolution> & previous() const { return previous_; }

  void reset()
  {
    previous_.reset();
    warm_.clear();
  }

  /// Seeds the grid: all nodes at x, all inputs at u.
  void initialize(const OcpProblem & p, const Vec & u)
  {
    OcpSolution s;
    s.x.assign(p.horizon_steps + 1, p.x0);
    s.u.assign(p.horizon_steps, u);
    s.applied_input = u;
    previous_ = s;
    warm_.clear();
    shifted_ = true;
  }

  /// Seeds the grid with an arbitrary guess (used as is by the next step).
  void set_guess(std::vector<Vec> x, std::vector<Vec> u)
  {
    OcpSolution s;
    s.x = std::move(x);
    s.u = std::move(u);
    s.applied_input = s.u.front();
    previous_ = s;
    warm_.clear();
    shifted_ = true;
  }

  /// Linearizes at the (shifted) guess and condenses.
  std::pair<ShootingGrid, CondensedQp> prepare(const OcpProblem & p, const std::vector<Vec> & xg, const std::vector<Vec> & ug) const
  {
    const int nx = model_.state_dim(), nu = model_.input_dim(), ny = model_.output_dim();
    p.validate(nx, nu, ny);
    const int n = p.horizon_steps;
    ShootingGrid grid;
    grid.x = xg;
    grid.u = ug;
    grid.a.resize(n);
    grid.b.resize(n);
    grid.defects.resize(n);
    grid.c.resize(n + 1);
    grid.d.resize(n + 1);
    grid.y.resize(n + 1);
    for (int h = 0; h < n; ++h) {
      auto s = sensitivities(model_, xg[h], ug[h], p.step, opt_.substeps);
      grid.defects[h] = s.next - xg[h + 1];
      grid.a[h] = std::move(s.a);
      grid.b[h] = std::move(s.b);
      if (!grid.a[h].allFinite() || !grid.b[h].allFinite() || !grid.defects[h].allFinite()) {
        throw std::runtime_error("rti: non-finite linearization");
      }
    }
    for (int h = 0; h <= n; ++h) {
      const Vec & uh = ug[std::min(h, n - 1)];
      grid.y[h] = model_.output(xg[h], uh);
      model_.output_jacobian(xg[h], uh, grid.c[h], grid.d[h]);
      if (h == n) { grid.d[h].setZero(); }
    }

    CondensedQp cq;
    const bool soft = p.has_soft_boxes();
    cq.input_vars = n * nu;
    cq.slack_vars = soft ? n : 0;
    const int nz = cq.input_vars + cq.slack_vars;

    cq.c.resize(n + 1);
    cq.g.resize(n + 1);
    cq.c[0] = p.x0 - xg[0];
    for (int h = 0; h < n; ++h) {
      cq.c[h + 1] = grid.a[h] * cq.c[h] + grid.defects[h];
      cq.g[h + 1].resize(h + 1);
      for (int j = 0; j < h; ++j) { cq.g[h + 1][j] = grid.a[h] * cq.g[h][j]; }
      cq.g[h + 1][h] = grid.b[h];
    }

    Mat hess = Mat::Zero(nz, nz);
    Vec grad = Vec::Zero(nz);
    Mat jac(ny, cq.input_vars);
    for (int h = 0; h <= n; ++h) {
      const Vec & q = h < n ? p.q_stage : p.q_terminal;
      if (q.isZero(0.0)) { continue; }
      jac.setZero();
      for (int j = 0; j < h; ++j) { jac.middleCols(j * nu, nu).noalias() = grid.c[h] * cq.g[h][j]; }
      if (h < n) { jac.middleCols(h * nu, nu) += grid.d[h]; }
      const Vec r0 = grid.y[h] + grid.c[h] * cq.c[h] - p.y_ref[h];
      const int cols = std::min(h + 1, n) * nu;
      const auto jl = jac.leftCols(cols);
      hess.topLeftCorner(cols, cols).noalias() += 2.0 * jl.transpose() * q.asDiagonal() * jl;
      grad.head(cols).noalias() += 2.0 * jl.transpose() * (q.asDiagonal() * r0);
    }
    for (int h = 0; h < n; ++h) {
      for (int i = 0; i < nu; ++i) {
        const double r = p.r_input(i) + opt_.levenberg;
        hess(h * nu + i, h * nu + i) += 2.0 * r;
        grad(h * nu + i) += 2.0 * r * ug[h](i);
      }
    }
    for (int s = 0; s < cq.slack_vars; ++s) {
      hess(cq.input_vars + s, cq.input_vars + s) = p.slack_penalty;
      grad(cq.input_vars + s) = p.slack_penalty;
    }

    cq.qp.hessian = 0.5 * (hess + hess.transpose());
    cq.qp.gradient = grad;
    cq.qp.lb.resize(nz);
    cq.qp.ub.resize(nz);
    for (int h = 0; h < n; ++h) {
      cq.qp.lb.segment(h * nu, nu) = p.u_lo[h] - ug[h];
      cq.qp.ub.segment(h * nu, nu) = p.u_hi[h] - ug[h];
    }
    cq.qp.lb.tail(cq.slack_vars).setZero();
    cq.qp.ub.tail(cq.slack_vars).setConstant(qp::kInf);

    int rows_per_node = 0;
    for (const auto & b : p.state_boxes) { rows_per_node += b.soft ? 2 : 1; }
    cq.rows_per_node = rows_per_node;
    const int nrows = rows_per_node * n;
    cq.qp.rows = Mat::Zero(nrows, nz);
    cq.qp.row_lb = Vec::Constant(nrows, -qp::kInf);
    cq.qp.row_ub = Vec::Constant(nrows, qp::kInf);
    int row = 0;
    for (int h = 1; h <= n; ++h) {
      for (const auto & b : p.state_boxes) {
        Eigen::RowVectorXd a = Eigen::RowVectorXd::Zero(nz);
        for (int j = 0; j < h; ++j) { a.segment(j * nu, nu) = cq.g[h][j].row(b.index); }
        const double base = xg[h](b.index) + cq.c[h](b.index);
        if (b.soft) {
          cq.qp.rows.row(row) = a;
          cq.qp.rows(row, cq.input_vars + h - 1) = 1.0;
          cq.qp.row_lb(row++) = b.lo - base;
          cq.qp.rows.row(row) = a;
          cq.qp.rows(row, cq.input_vars + h - 1) = -1.0;
          cq.qp.row_ub(row++) = b.hi - base;
        } else {
          cq.qp.rows.row(row) = a;
          cq.qp.row_lb(row) = b.lo - base;
          cq.qp.row_ub(row++) = b.hi - base;
        }
      }
    }
    return {std::move(grid), std::move(cq)};
  }

  /**
   * @brief One RTI step at the measured state p.x0.
   *
   * The previous solution is shifted by shift_fraction intervals and used as
   * linearization point. On QP failure, iteration cap or a missed deadline the
   * previous plan's input for the current instant is returned (backup).
   */
  OcpSolution solve_step(const OcpProblem & p, double deadline = std::numeric_limits<double>::infinity())
  {
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    const int nu = model_.input_dim();
    const int n = p.horizon_steps;

    if (!previous_) { initialize(p, Vec::Zero(nu)); }
    if (!shifted_) { shift(); }
    shifted_ = false;
    OcpSolution guess = *previous_;
    if (static_cast<int>(guess.u.size()) != n) { throw std::runtime_error("rti: horizon changed between calls"); }

    auto backup = [&](SolveStatus status, int iters) {
      if (!had_solution_) { throw std::runtime_error("rti: solve failed and no previous solution is available"); }
      OcpSolution s = guess;
      s.applied_input = guess.u[0].cwiseMax(p.u_lo[0]).cwiseMin(p.u_hi[0]);
      s.status = status;
      s.qp_iterations = iters;
      s.solve_time = std::chrono::duration<double>(clock::now() - t0).count();
      previous_ = s;
      return s;
    };

    if (deadline <= 0.0) { return backup(SolveStatus::backup_used, 0); }

    auto [grid, cq] = prepare(p, guess.x, guess.u);
    const Vec zg = primal_guess(cq);
    const auto res = qp::solve(cq.qp, warm_, opt_.qp, &zg);
    const double elapsed = std::chrono::duration<double>(clock::now() - t0).count();
    if (res.status == qp::QpStatus::infeasible) { return backup(SolveStatus::infeasible, res.iterations); }
    if (res.status == qp::QpStatus::max_iter || elapsed > deadline) {
      return backup(SolveStatus::backup_used, res.iterations);
    }

    OcpSolution s;
    s.u.resize(n);
    s.x.resize(n + 1);
    for (int h = 0; h < n; ++h) { s.u[h] = guess.u[h] + res.z.segment(h * nu, nu); }
    for (int h = 0; h <= n; ++h) {
      Vec dx = cq.c[h];
      for (int j = 0; j < h; ++j) { dx.noalias() += cq.g[h][j] * res.z.segment(j * nu, nu); }
      s.x[h] = guess.x[h] + dx;
    }
    s.applied_input = s.u[0].cwiseMax(p.u_lo[0]).cwiseMin(p.u_hi[0]);
    s.qp_iterations = res.iterations;
    s.active_set_size = static_cast<int>(res.active.size());
    s.slack_max = cq.slack_vars > 0 ? res.z.tail(cq.slack_vars).maxCoeff() : 0.0;
    const auto k = qp::kkt_residuals(cq.qp, res);
    s.kkt_residual = std::max({k.stationarity / (1.0 + cq.qp.gradient.cwiseAbs().maxCoeff()), k.primal, k.dual});
    s.status = SolveStatus::solved;
    s.solve_time = std::chrono::duration<double>(clock::now() - t0).count();
    warm_ = res.active;
    warm_rows_per_node_ = cq.rows_per_node;
    previous_ = s;
    had_solution_ = true;
    return s;
  }

private:
  // The shifted plan itself (zero increments pushed into the boxes) with
  // slacks large enough for the soft rows: a feasible warm start.
  static Vec primal_guess(const CondensedQp & cq)
  {
    Vec z = Vec::Zero(cq.qp.num_vars()).cwiseMax(cq.qp.lb).cwiseMin(cq.qp.ub);
    if (cq.slack_vars == 0 || cq.qp.num_rows() == 0) { return z; }
    const Vec cz = cq.qp.rows * z;
    for (int j = 0; j < cq.qp.num_rows(); ++j) {
      for (int h = 0; h < cq.slack_vars; ++h) {
        const double c = cq.qp.rows(j, cq.input_vars + h);
        if (c == 0.0) { continue; }
        const double viol = c > 0.0 ? cq.qp.row_lb(j) - cz(j) : cz(j) - cq.qp.row_ub(j);
        z(cq.input_vars + h) = std::max(z(cq.input_vars + h), viol);
      }
    }
    return z;
  }

  // Advances the stored plan by shift_fraction of an interval; the last node
  // and input are duplicated past the end.
  void shift()
  {
    auto & s = *previous_;
    const double f = opt_.shift_fraction;
    const std::size_t n = s.u.size();
    if (f <= 0.0) { return; }
    if (f >= 1.0) {
      // plain copy so the backup equals the stored plan bit for bit
      for (std::size_t h = 0; h + 1 < n; ++h) { s.u[h] = s.u[h + 1]; }
      for (std::size_t h = 0; h < n; ++h) { s.x[h] = s.x[h + 1]; }
    } else {
      for (std::size_t h = 0; h < n; ++h) {
        const Vec & un = h + 1 < n ? s.u[h + 1] : s.u[n - 1];
        s.u[h] = (1.0 - f) * s.u[h] + f * un;
      }
      for (std::size_t h = 0; h <= n; ++h) {
        const Vec & xn = h + 1 <= n ? s.x[h + 1] : s.x[n];
        s.x[h] = (1.0 - f) * s.x[h] + f * xn;
      }
    }
    if (f >= 1.0) {
      // the active set moves one node earlier with the plan
      const int nu = model_.input_dim();
      const int iv = static_cast<int>(n) * nu;
      std::vector<qp::ActiveConstraint> moved;
      for (auto a : warm_) {
        if (a.is_row) {
          a.index -= warm_rows_per_node_;
        } else if (a.index < iv) {
          a.index -= nu;
        } else {
          a.index -= 1;
          if (a.index < iv) { continue; }
        }
        if (a.index >= 0) { moved.push_back(a); }
      }
      warm_ = std::move(moved);
    }
  }

  M model_;
  RtiOptions opt_;
  std::optional<OcpSolution> previous_;
  std::vector<qp::ActiveConstraint> warm_;
  int warm_rows_per_node_ = 0;
  bool shifted_ = true;
  bool had_solution_ = false;
};

}  // namespace mrav
