#pragma once

/**
 * @file
 * @brief Dense strictly convex QP solver, primal active-set method.
 *
 *   min 0.5 z'Hz + g'z   s.t.  lb <= z <= ub,  lbC <= Cz <= ubC
 *
 * Multipliers follow Hz + g - C'lambda_C - lambda_b = 0 with lambda > 0 on an
 * active lower side and lambda < 0 on an active upper side.
 */

#include "types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace mrav::qp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct DenseQp
{
  Mat hessian;
  Vec gradient;
  Vec lb, ub;
  Mat rows;
  Vec row_lb, row_ub;

  int num_vars() const { return static_cast<int>(gradient.size()); }
  int num_rows() const { return static_cast<int>(rows.rows()); }

  /// Unbounded problem with n variables and no general rows.
  static DenseQp unconstrained(const Mat & h, const Vec & g)
  {
    DenseQp q;
    q.hessian = h;
    q.gradient = g;
    q.lb = Vec::Constant(g.size(), -kInf);
    q.ub = Vec::Constant(g.size(), kInf);
    q.rows.resize(0, g.size());
    return q;
  }

  void validate() const
  {
    const int n = num_vars();
    if (hessian.rows() != n || hessian.cols() != n || lb.size() != n || ub.size() != n) {
      throw std::invalid_argument("qp: inconsistent variable dimensions");
    }
    if (rows.cols() != n || row_lb.size() != rows.rows() || row_ub.size() != rows.rows()) {
      throw std::invalid_argument("qp: inconsistent row dimensions");
    }
    if (!hessian.allFinite() || !gradient.allFinite() || !rows.allFinite()) {
      throw std::invalid_argument("qp: non-finite data");
    }
    if ((hessian - hessian.transpose()).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + hessian.cwiseAbs().maxCoeff())) {
      throw std::invalid_argument("qp: hessian not symmetric");
    }
    for (int i = 0; i < n; ++i) {
      if (lb(i) > ub(i)) { throw std::invalid_argument("qp: lb > ub"); }
    }
    for (int j = 0; j < num_rows(); ++j) {
      if (row_lb(j) > row_ub(j)) { throw std::invalid_argument("qp: lbC > ubC"); }
    }
  }
};

/// One side of a bound or row.
struct ActiveConstraint
{
  bool is_row = false;
  int index = 0;
  bool upper = false;
  double multiplier = 0.0;  // >= 0 at a KKT point

  bool same(const ActiveConstraint & o) const { return is_row == o.is_row && index == o.index && upper == o.upper; }
};

enum class QpStatus { optimal, max_iter, infeasible };

struct QpOptions
{
  int max_iterations = 500;
  double feasibility_tol = 1e-9;
  double dual_tol = 1e-11;
  double phase1_penalty = 1e4;
  double phase1_proximity = 1.0;
  bool record_objective = false;
};

struct QpResult
{
  Vec z;
  Vec bound_multipliers;
  Vec row_multipliers;
  std::vector<ActiveConstraint> active;
  int iterations = 0;
  QpStatus status = QpStatus::infeasible;
  std::vector<double> objective_trace;
};

inline double objective(const DenseQp & q, const Vec & z)
{
  return 0.5 * z.dot(q.hessian * z) + q.gradient.dot(z);
}

namespace detail {

// a'z >= b, with a = sign * e_var for bound sides.
struct Constraint
{
  int var = -1;
  double sign = 1.0;
  Vec row;
  double b = 0.0;
  ActiveConstraint tag;
  int partner = -1;  // other side of the same bound or row

  double dot(const Vec & v) const { return var >= 0 ? sign * v(var) : row.dot(v); }
  Vec dense(int n) const
  {
    if (var < 0) { return row; }
    Vec a = Vec::Zero(n);
    a(var) = sign;
    return a;
  }
};

inline std::vector<Constraint> collect(const DenseQp & q)
{
  std::vector<Constraint> cs;
  const int n = q.num_vars();
  for (int i = 0; i < n; ++i) {
    if (std::isfinite(q.lb(i))) { cs.push_back({i, 1.0, {}, q.lb(i), {false, i, false}}); }
    if (std::isfinite(q.ub(i))) { cs.push_back({i, -1.0, {}, -q.ub(i), {false, i, true}}); }
  }
  for (int j = 0; j < q.num_rows(); ++j) {
    if (std::isfinite(q.row_lb(j))) { cs.push_back({-1, 1.0, q.rows.row(j).transpose(), q.row_lb(j), {true, j, false}}); }
    if (std::isfinite(q.row_ub(j))) { cs.push_back({-1, -1.0, -q.rows.row(j).transpose(), -q.row_ub(j), {true, j, true}}); }
  }
  for (std::size_t k = 1; k < cs.size(); ++k) {
    if (cs[k].tag.is_row == cs[k - 1].tag.is_row && cs[k].tag.index == cs[k - 1].tag.index) {
      cs[k].partner = static_cast<int>(k - 1);
      cs[k - 1].partner = static_cast<int>(k);
    }
  }
  return cs;
}

// Minimizer of the QP restricted to the working set held with equality,
// computed in range-space form from the Cholesky factor L of H. With
// M = L^-1 A_W the factor R of M'M (R'R = M'M) is updated column by column.
class WorkingSetSolver
{
public:
  WorkingSetSolver(const Eigen::LLT<Mat> & llt, const Vec & g, const std::vector<Constraint> & cs)
      : llt_(llt), cs_(cs), n_(static_cast<int>(g.size()))
  {
    lg_ = llt_.matrixL().solve(g);
  }

  /// Appends the constraint column; false when it is (numerically) dependent.
  bool add(int k)
  {
    Vec m = llt_.matrixL().solve(cs_[k].dense(n_));
    const double mn = m.squaredNorm();
    if (!(mn > 0.0)) { return false; }
    const int w = static_cast<int>(w_.size());
    Vec r(w);
    double rho2 = mn;
    if (w > 0) {
      r = m_.leftCols(w).transpose() * m;
      r_.topLeftCorner(w, w).template triangularView<Eigen::Upper>().transpose().solveInPlace(r);
      rho2 -= r.squaredNorm();
    }
    if (!(rho2 > 1e-12 * mn)) { return false; }
    if (m_.cols() <= w) {
      const Eigen::Index cap = std::max<Eigen::Index>(8, 2 * m_.cols() + 1);
      m_.conservativeResize(n_, cap);
      r_.conservativeResize(cap, cap);
    }
    m_.col(w) = m;
    r_.col(w).head(w) = r;
    r_.row(w).head(w).setZero();
    r_(w, w) = std::sqrt(rho2);
    w_.push_back(k);
    return true;
  }

  void remove(std::size_t pos)
  {
    const int m = static_cast<int>(w_.size());
    const int p = static_cast<int>(pos);
    for (int i = p; i + 1 < m; ++i) {
      m_.col(i) = m_.col(i + 1);
      r_.col(i).head(m) = r_.col(i + 1).head(m);
    }
    // R is now upper Hessenberg from column p; restore it with Givens rotations
    for (int i = p; i + 1 < m; ++i) {
      Eigen::JacobiRotation<double> gr;
      gr.makeGivens(r_(i, i), r_(i + 1, i));
      r_.block(0, 0, m, m - 1).applyOnTheLeft(i, i + 1, gr.adjoint());
      r_(i + 1, i) = 0.0;
    }
    w_.erase(w_.begin() + static_cast<std::ptrdiff_t>(pos));
  }

  const std::vector<int> & working() const { return w_; }

  /// Solves the equality-constrained problem; false on a non-finite result.
  bool solve(Vec & z, Vec & lambda) const
  {
    const int m = static_cast<int>(w_.size());
    if (m == 0) {
      lambda.resize(0);
      z = -llt_.matrixU().solve(lg_);
      return true;
    }
    const auto mm = m_.leftCols(m);
    Vec rhs(m);
    for (int i = 0; i < m; ++i) { rhs(i) = cs_[w_[i]].b; }
    rhs.noalias() += mm.transpose() * lg_;
    const auto r = r_.topLeftCorner(m, m).template triangularView<Eigen::Upper>();
    r.transpose().solveInPlace(rhs);
    r.solveInPlace(rhs);
    lambda = rhs;
    z = llt_.matrixU().solve(mm * lambda - lg_);
    return lambda.allFinite() && z.allFinite();
  }

private:
  const Eigen::LLT<Mat> & llt_;
  const std::vector<Constraint> & cs_;
  int n_;
  Vec lg_;
  Mat m_;
  Mat r_;
  std::vector<int> w_;
};

struct CoreResult
{
  Vec z;
  std::vector<int> working;
  Vec lambda;
  int iterations = 0;
  bool converged = false;
};

inline double max_violation(const std::vector<Constraint> & cs, const Vec & z)
{
  double v = 0.0;
  for (const auto & c : cs) { v = std::max(v, c.b - c.dot(z)); }
  return v;
}

// Primal active-set iterations from a feasible z whose working set is satisfied
// with equality. Ties in the ratio test and in the dropping rule go to the
// lowest constraint index.
inline CoreResult active_set_core(
  const Mat & h, const Vec & g, const std::vector<Constraint> & cs, const Vec & z0, const std::vector<int> & w0,
  const QpOptions & opt, std::vector<double> * trace)
{
  Eigen::LLT<Mat> llt(h);
  if (llt.info() != Eigen::Success) { throw std::invalid_argument("qp: hessian not positive definite"); }
  WorkingSetSolver ws(llt, g, cs);
  std::vector<char> in_w(cs.size(), 0);
  for (int k : w0) {
    if (ws.add(k)) { in_w[k] = 1; }
  }

  CoreResult r;
  r.z = z0;
  const double gscale = 1.0 + g.cwiseAbs().maxCoeff();
  Vec zw, lambda;
  auto record = [&]() {
    if (trace) { trace->push_back(0.5 * r.z.dot(h * r.z) + g.dot(r.z)); }
  };
  record();

  while (true) {
    if (!ws.solve(zw, lambda)) { break; }
    const Vec p = zw - r.z;
    const double pscale = 1.0 + r.z.cwiseAbs().maxCoeff();
    if (p.cwiseAbs().maxCoeff() <= 1e-12 * pscale) {
      r.z = zw;
      int drop = -1;
      double most = -opt.dual_tol * gscale;
      for (std::size_t i = 0; i < ws.working().size(); ++i) {
        if (lambda(static_cast<Eigen::Index>(i)) < most
            || (drop >= 0 && lambda(static_cast<Eigen::Index>(i)) == most && ws.working()[i] < ws.working()[drop])) {
          most = lambda(static_cast<Eigen::Index>(i));
          drop = static_cast<int>(i);
        }
      }
      if (drop < 0) {
        r.converged = true;
        break;
      }
      if (r.iterations >= opt.max_iterations) { break; }
      in_w[ws.working()[drop]] = 0;
      ws.remove(static_cast<std::size_t>(drop));
      ++r.iterations;
      continue;
    }

    double alpha = 1.0;
    int block = -1;
    for (std::size_t k = 0; k < cs.size(); ++k) {
      if (in_w[k] || (cs[k].partner >= 0 && in_w[cs[k].partner])) { continue; }
      const double ap = cs[k].dot(p);
      if (ap >= -1e-14 * p.cwiseAbs().maxCoeff()) { continue; }
      const double a = std::max(0.0, (cs[k].b - cs[k].dot(r.z)) / ap);
      if (a < alpha) {
        alpha = a;
        block = static_cast<int>(k);
      }
    }
    if (block < 0) {
      r.z = zw;
      record();
      continue;
    }
    r.z += alpha * p;
    record();
    if (r.iterations >= opt.max_iterations) { break; }
    if (ws.add(block)) {
      in_w[block] = 1;
    } else {
      break;  // degenerate dependent blocking constraint; stop with a feasible point
    }
    ++r.iterations;
  }
  r.working = ws.working();
  r.lambda = lambda;
  if (r.lambda.size() != static_cast<Eigen::Index>(r.working.size())) { r.lambda = Vec::Zero(r.working.size()); }
  return r;
}

}  // namespace detail

/**
 * @brief Active-set solve with optional warm-start working set.
 *
 * A warm-start set is used when the minimizer on that set is feasible;
 * otherwise the solve starts from the unconstrained minimizer clamped to
 * the bounds, going through an elastic phase 1 when rows are violated.
 */
inline QpResult solve(
  const DenseQp & q, const std::vector<ActiveConstraint> & warm_start = {}, const QpOptions & opt = {},
  const Vec * primal_guess = nullptr)
{
  q.validate();
  const int n = q.num_vars();
  const auto cs = detail::collect(q);
  const double ftol = opt.feasibility_tol * (1.0 + q.gradient.cwiseAbs().maxCoeff());

  QpResult res;
  res.bound_multipliers = Vec::Zero(n);
  res.row_multipliers = Vec::Zero(q.num_rows());

  Eigen::LLT<Mat> llt(q.hessian);
  if (llt.info() != Eigen::Success) { throw std::invalid_argument("qp: hessian not positive definite"); }

  Vec z0;
  std::vector<int> w0;
  bool have_start = false;

  if (!warm_start.empty()) {
    detail::WorkingSetSolver ws(llt, q.gradient, cs);
    for (const auto & a : warm_start) {
      for (std::size_t k = 0; k < cs.size(); ++k) {
        if (cs[k].tag.same(a)) {
          ws.add(static_cast<int>(k));
          break;
        }
      }
    }
    Vec zw, lam;
    if (ws.solve(zw, lam) && detail::max_violation(cs, zw) <= ftol) {
      z0 = zw;
      w0 = ws.working();
      have_start = true;
    }
  }

  if (!have_start && primal_guess && primal_guess->size() == n) {
    // feasible guess: keep the warm-start constraints it satisfies with equality
    const Vec zg = primal_guess->cwiseMax(q.lb).cwiseMin(q.ub);
    if (detail::max_violation(cs, zg) <= ftol) {
      z0 = zg;
      w0.clear();
      for (const auto & a : warm_start) {
        for (std::size_t k = 0; k < cs.size(); ++k) {
          if (cs[k].tag.same(a)) {
            if (std::abs(cs[k].dot(z0) - cs[k].b) <= ftol) { w0.push_back(static_cast<int>(k)); }
            break;
          }
        }
      }
      have_start = true;
    }
  }

  if (!have_start) {
    z0 = llt.solve(-q.gradient);
    z0 = z0.cwiseMax(q.lb).cwiseMin(q.ub);
    w0.clear();
    for (std::size_t k = 0; k < cs.size(); ++k) {
      if (cs[k].var >= 0 && std::abs(cs[k].dot(z0) - cs[k].b) == 0.0) { w0.push_back(static_cast<int>(k)); }
    }
    if (detail::max_violation(cs, z0) > ftol) {
      // Phase 1: elastic variable t >= 0 on every constraint side, rows
      // normalized so the penalty compares with distances in z.
      const int n1 = n + 1;
      Mat h1 = Mat::Zero(n1, n1);
      h1.diagonal().head(n).setConstant(opt.phase1_proximity);
      h1(n, n) = 1.0;
      Vec g1 = Vec::Zero(n1);
      g1.head(n) = -opt.phase1_proximity * z0;
      g1(n) = opt.phase1_penalty * (1.0 + z0.cwiseAbs().maxCoeff());
      std::vector<detail::Constraint> c1;
      c1.reserve(cs.size() + 1);
      for (const auto & c : cs) {
        detail::Constraint e;
        e.row = Vec::Zero(n1);
        const Vec a = c.dense(n);
        const double an = a.norm();
        e.row.head(n) = a / an;
        e.row(n) = 1.0;
        e.b = c.b / an;
        c1.push_back(std::move(e));
      }
      detail::Constraint tpos;
      tpos.var = n;
      tpos.b = 0.0;
      c1.push_back(tpos);
      Vec x1(n1);
      x1.head(n) = z0;
      x1(n) = detail::max_violation(cs, z0);
      QpOptions o1 = opt;
      o1.max_iterations = std::max(opt.max_iterations, 4 * static_cast<int>(c1.size()));
      const auto p1 = detail::active_set_core(h1, g1, c1, x1, {}, o1, nullptr);
      res.iterations += p1.iterations;
      z0 = p1.z.head(n);
      if (p1.z(n) > ftol || detail::max_violation(cs, z0) > 10.0 * ftol) {
        res.z = z0;
        res.status = QpStatus::infeasible;
        return res;
      }
      w0.clear();
      for (int k : p1.working) {
        if (k < static_cast<int>(cs.size())) { w0.push_back(k); }
      }
    }
  }

  auto core = detail::active_set_core(
    q.hessian, q.gradient, cs, z0, w0, opt, opt.record_objective ? &res.objective_trace : nullptr);
  res.iterations += core.iterations;
  res.z = core.z;
  res.status = core.converged ? QpStatus::optimal : QpStatus::max_iter;
  for (std::size_t i = 0; i < core.working.size(); ++i) {
    const auto & c = cs[core.working[i]];
    ActiveConstraint a = c.tag;
    a.multiplier = core.lambda(static_cast<Eigen::Index>(i));
    res.active.push_back(a);
    const double signed_mult = a.upper ? -a.multiplier : a.multiplier;
    if (a.is_row) {
      res.row_multipliers(a.index) += signed_mult;
    } else {
      res.bound_multipliers(a.index) += signed_mult;
    }
  }
  return res;
}

/// KKT residuals (stationarity, primal infeasibility, complementarity, dual sign).
struct KktResiduals
{
  double stationarity = 0.0;
  double primal = 0.0;
  double complementarity = 0.0;
  double dual = 0.0;
};

inline KktResiduals kkt_residuals(const DenseQp & q, const QpResult & r)
{
  KktResiduals k;
  const Vec grad = q.hessian * r.z + q.gradient;
  Vec stat = grad - r.bound_multipliers;
  if (q.num_rows() > 0) { stat -= q.rows.transpose() * r.row_multipliers; }
  k.stationarity = stat.cwiseAbs().maxCoeff();
  auto side = [&](double value, double lo, double hi, double mult) {
    k.primal = std::max({k.primal, lo - value, value - hi});
    if (mult > 0.0) {
      k.complementarity = std::max(k.complementarity, mult * std::abs(value - lo));
      if (!std::isfinite(lo)) { k.dual = std::max(k.dual, mult); }
    } else if (mult < 0.0) {
      k.complementarity = std::max(k.complementarity, -mult * std::abs(hi - value));
      if (!std::isfinite(hi)) { k.dual = std::max(k.dual, -mult); }
    }
  };
  for (int i = 0; i < q.num_vars(); ++i) { side(r.z(i), q.lb(i), q.ub(i), r.bound_multipliers(i)); }
  const Vec cz = q.num_rows() > 0 ? Vec(q.rows * r.z) : Vec();
  for (int j = 0; j < q.num_rows(); ++j) { side(cz(j), q.row_lb(j), q.row_ub(j), r.row_multipliers(j)); }
  for (const auto & a : r.active) { k.dual = std::max(k.dual, -a.multiplier); }
  return k;
}

}  // namespace mrav::qp
