#pragma once

#include <cmath>
#include <vector>

#include "tvvi/core/solution.hpp"
#include "tvvi/util/linalg.hpp"

namespace tvvi {

namespace detail {

// Affine slack structure at a point y: q_j = (Ky)_j/|(Ky)_j| fixed on the
// inactive set, and on active cells q_A must satisfy  B q_A = c  with
// B q_A = sum_{j in A} K_j^T q_j  and  c = u - A y - K_I^T q_I.
struct SlackAffine {
  std::vector<int> active;
  dmat q_fixed;  // m x d: unit cell gradients on I, zero elsewhere
  dvec c;

  SlackAffine(const VIProblem& p, const dvec& y, double eps_active) {
    dmat W = apply_K(p, y);
    q_fixed = dmat::Zero(p.m(), p.d());
    for (int j = 0; j < p.m(); ++j) {
      double nw = W.row(j).norm();
      if (nw > eps_active)
        q_fixed.row(j) = W.row(j) / nw;
      else
        active.push_back(j);
    }
    c = p.u - p.A() * y - apply_Kt(p, q_fixed);
  }

  // sum_{j in A} K_j^T x_j for an |A| x d array x
  dvec apply_B(const VIProblem& p, const dmat& x) const {
    dmat full = dmat::Zero(p.m(), p.d());
    for (size_t k = 0; k < active.size(); ++k) full.row(active[k]) = x.row(static_cast<int>(k));
    return apply_Kt(p, full);
  }

  // ((K v)_j)_{j in A}
  dmat apply_Bt(const VIProblem& p, const dvec& v) const {
    dmat W = apply_K(p, v);
    dmat out(static_cast<int>(active.size()), p.d());
    for (size_t k = 0; k < active.size(); ++k) out.row(static_cast<int>(k)) = W.row(active[k]);
    return out;
  }

  // Euclidean projection of x onto {B x = c}; CG on the (consistent,
  // possibly singular) normal system B B^T w = B x - c.
  dmat project_affine(const VIProblem& p, const dmat& x, double tol, bool* ok) const {
    dvec rhs = apply_B(p, x) - c;
    auto op = [&](const dvec& v) { return apply_B(p, apply_Bt(p, v)); };
    bool conv = false;
    dvec w = linalg::cg_consistent(op, rhs, tol, 400 + 2 * p.n(), &conv);
    if (ok) *ok = conv;
    return x - apply_Bt(p, w);
  }
};

inline dmat project_balls(const dmat& x, double radius) {
  dmat out = x;
  for (int j = 0; j < x.rows(); ++j) {
    double nx = out.row(j).norm();
    if (nx > radius) out.row(j) *= radius / nx;
  }
  return out;
}

}  // namespace detail

struct SlackSelection {
  dmat q;           // m x d feasible slack
  double objective = 0.0;  // |q|_F^2 on A for Euclidean, r_bar for the inf-norm problem
  int iterations = 0;
};

// Smallest-Euclidean-norm slack compatible with y: least-norm solution of the
// affine system, followed by Dykstra projections when a unit ball binds.
// feas_tol budgets the state-equation mismatch a solver-sourced y may carry;
// direction noise on inactive cells is amplified by 1/|(Ky)_j|, so the default
// sits well above solver tolerances but far below any genuine infeasibility.
inline SlackSelection min_euclidean_slack(const VIProblem& p, const dvec& y,
                                          double eps_active = 1e-8, double tol = 1e-10,
                                          int max_iter = 20000, double feas_tol = 1e-6) {
  detail::SlackAffine aff(p, y, eps_active);
  SlackSelection out;
  out.q = aff.q_fixed;
  const int na = static_cast<int>(aff.active.size());
  const double feas_scale = feas_tol * (1.0 + p.u.norm());
  if (na == 0) {
    if (aff.c.norm() > feas_scale)
      throw Infeasible("state equation residual with no active cells");
    out.objective = 0.0;
    return out;
  }

  auto op = [&](const dvec& v) { return aff.apply_B(p, aff.apply_Bt(p, v)); };
  bool conv = false;
  dvec w = linalg::cg_consistent(op, aff.c, 1e-13, 400 + 2 * p.n(), &conv);
  // CG stalls at the distance of c from range(B); only that distance decides
  // infeasibility, not the (much tighter) CG convergence target.
  if (!conv && (op(w) - aff.c).norm() > feas_scale)
    throw Infeasible("affine slack system is inconsistent: y is not a VI solution");
  dmat x = aff.apply_Bt(p, w);  // least-norm point of the affine set

  double worst = 0.0;
  for (int k = 0; k < na; ++k) worst = std::max(worst, x.row(k).norm());
  if (worst > 1.0 + 1e-10) {
    // Dykstra from the origin onto {affine} intersect {unit balls}
    dmat yk = dmat::Zero(na, p.d()), corr = dmat::Zero(na, p.d());
    int it = 0;
    for (; it < max_iter; ++it) {
      dmat z = detail::project_balls(yk + corr, 1.0);
      corr += yk - z;
      bool ok = false;
      dmat y_next = aff.project_affine(p, z, 1e-13, &ok);
      double step = (y_next - z).norm();
      yk = y_next;
      if (ok && step <= tol * (1.0 + yk.norm())) break;
    }
    if (it >= max_iter)
      throw NoConvergence("min_euclidean_slack Dykstra stalled", max_iter, 0.0);
    out.iterations = it;
    x = detail::project_balls(yk, 1.0 + 1e-12);
  }
  for (int k = 0; k < na; ++k) {
    double nx = x.row(k).norm();
    if (nx > 1.0) x.row(k) /= nx;  // hairline feasibility clip
    out.q.row(aff.active[k]) = x.row(k);
    out.objective += x.row(k).squaredNorm();
  }
  return out;
}

struct MinLinfResult {
  double r_bar = 0.0;  // minimal max_j |q_j|^2 over active cells
  dmat q_bar;          // feasible slack realizing ~r_bar
  int bisection_steps = 0;
};

struct MinLinfConfig {
  double bisect_width = 1e-6;
  double gap_tol = 1e-9;       // ball violation accepted as "feasible"
  int max_cycles = 20000;      // POCS cycles per feasibility test
  int stagnation_window = 400;
  double stagnation_factor = 1e-2;
  double eps_active = 1e-8;
  double feas_tol = 1e-6;  // allowed state-equation mismatch, relative to 1 + |u|
};

// Smallest r such that a slack with |q_j|^2 <= r on the active set exists
// (complementarity fixes q on I). Outer bisection on r; inner feasibility by
// alternating projections between the affine set and the radius-sqrt(r) balls.
inline MinLinfResult min_linf_slack(const VIProblem& p, const dvec& y,
                                    const MinLinfConfig& cfg = {}) {
  detail::SlackAffine aff(p, y, cfg.eps_active);
  const int na = static_cast<int>(aff.active.size());
  MinLinfResult out;
  out.q_bar = aff.q_fixed;
  const double feas_scale = cfg.feas_tol * (1.0 + p.u.norm());
  if (na == 0) {
    if (aff.c.norm() > feas_scale)
      throw Infeasible("state equation residual with no active cells");
    return out;
  }

  {
    // One consistency check up front: the component of c outside range(B) is
    // invariant under the POCS cycles below, so it is decided once.
    auto op = [&](const dvec& v) { return aff.apply_B(p, aff.apply_Bt(p, v)); };
    bool conv = false;
    dvec w = linalg::cg_consistent(op, aff.c, 1e-13, 400 + 2 * p.n(), &conv);
    if (!conv && (op(w) - aff.c).norm() > feas_scale)
      throw Infeasible("affine slack system is inconsistent: y is not a VI solution");
  }

  dmat warm = dmat::Zero(na, p.d());
  dmat q_feasible;
  // returns the achieved ball violation of an affine-feasible point
  auto feasibility_gap = [&](double radius, dmat& x) {
    double prev_gap = std::numeric_limits<double>::infinity();
    for (int it = 0; it < cfg.max_cycles; ++it) {
      x = aff.project_affine(p, x, 1e-13, nullptr);
      double gap = 0.0;
      for (int k = 0; k < na; ++k) gap = std::max(gap, x.row(k).norm() - radius);
      if (gap <= cfg.gap_tol) return gap;
      if (it > 0 && it % cfg.stagnation_window == 0) {
        if (gap >= prev_gap * (1.0 - cfg.stagnation_factor)) return gap;
        prev_gap = gap;
      }
      x = detail::project_balls(x, radius);
    }
    double gap = 0.0;
    for (int k = 0; k < na; ++k) gap = std::max(gap, x.row(k).norm() - radius);
    return gap;
  };

  dmat x1 = warm;
  if (feasibility_gap(1.0, x1) > cfg.gap_tol)
    throw Infeasible("no feasible slack with |q_j| <= 1: y is not a VI solution");
  q_feasible = x1;

  double lo = 0.0, hi = 1.0;
  while (hi - lo > cfg.bisect_width) {
    double mid = 0.5 * (lo + hi);
    dmat x = q_feasible;  // warm start from the last feasible point
    if (feasibility_gap(std::sqrt(mid), x) <= cfg.gap_tol) {
      hi = mid;
      q_feasible = x;
    } else {
      lo = mid;
    }
    ++out.bisection_steps;
  }
  out.r_bar = hi;
  for (int k = 0; k < na; ++k) out.q_bar.row(aff.active[k]) = q_feasible.row(k);
  return out;
}

}  // namespace tvvi
