#pragma once

#include <cmath>
#include <vector>

#include "tvvi/core/solution.hpp"

namespace tvvi {

// Builds the n=1 family: A = [a], K = ones(k_rows, 1), control u.
// Closed form: y = sign(u) max(|u| - k_rows, 0) / a.
inline VIProblem build_scalar_family(double a, int k_rows, double u) {
  if (a <= 0.0 || k_rows < 1) throw InvalidProblem("scalar family needs a > 0, k_rows >= 1");
  SpMat A(1, 1);
  A.insert(0, 0) = a;
  SpMat K(k_rows, 1);
  for (int j = 0; j < k_rows; ++j) K.insert(j, 0) = 1.0;
  dvec uu(1);
  uu << u;
  return VIProblem(std::move(A), {std::move(K)}, std::move(uu));
}

namespace detail {

// min sum q_j^2  s.t.  sum w_j q_j = c, |q_j| <= 1. KKT: q_j = clamp(w_j t, -1, 1)
// with t chosen so the constraint holds; h(t) is monotone, solve by bisection.
inline std::vector<double> min_norm_box_slack(const std::vector<double>& w, double c) {
  double reach = 0.0;
  for (double wj : w) reach += std::abs(wj);
  if (std::abs(c) > reach + 1e-12) throw Infeasible("separable slack: |c| exceeds sum |w_j|");
  auto h = [&](double t) {
    double s = 0.0;
    for (double wj : w) s += wj * std::clamp(wj * t, -1.0, 1.0);
    return s;
  };
  double lo = -1e18, hi = 1e18;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    (h(mid) < c ? lo : hi) = mid;
  }
  double t = 0.5 * (lo + hi);
  std::vector<double> q(w.size());
  for (size_t j = 0; j < w.size(); ++j) q[j] = std::clamp(w[j] * t, -1.0, 1.0);
  return q;
}

}  // namespace detail

// Exact solver for column-separable instances: d = 1, A diagonal, and each row of
// K has a single nonzero. Energy decouples per variable into
// 1/2 a y^2 - u y + (sum_j |w_j|) |y|, a soft threshold. Throws InvalidProblem
// if the structure does not hold.
inline VISolution solve_vi_oracle_separable(const VIProblem& p) {
  if (p.d() != 1) throw InvalidProblem("oracle handles d = 1 only");
  const SpMat& A = p.A();
  for (int k = 0; k < A.outerSize(); ++k)
    for (SpMat::InnerIterator it(A, k); it; ++it)
      if (it.row() != it.col() && it.value() != 0.0)
        throw InvalidProblem("oracle requires diagonal A");
  const SpMat& K = p.Ks()[0];
  std::vector<int> col_of(p.m(), -1);
  std::vector<double> w_of(p.m(), 0.0);
  std::vector<std::vector<int>> rows_of_col(p.n());
  SpMat Kr = K;
  Kr.makeCompressed();
  for (int k = 0; k < Kr.outerSize(); ++k)
    for (SpMat::InnerIterator it(Kr, k); it; ++it) {
      if (it.value() == 0.0) continue;
      if (col_of[it.row()] != -1) throw InvalidProblem("oracle requires one nonzero per K row");
      col_of[it.row()] = static_cast<int>(it.col());
      w_of[it.row()] = it.value();
      rows_of_col[it.col()].push_back(static_cast<int>(it.row()));
    }
  for (int j = 0; j < p.m(); ++j)
    if (col_of[j] == -1) throw InvalidProblem("oracle requires a nonzero in every K row");

  VISolution sol;
  sol.y = dvec::Zero(p.n());
  sol.q = dmat::Zero(p.m(), 1);
  for (int i = 0; i < p.n(); ++i) {
    double a = A.coeff(i, i);
    if (a <= 0.0) throw InvalidProblem("oracle requires positive diagonal A");
    double thresh = 0.0;
    for (int j : rows_of_col[i]) thresh += std::abs(w_of[j]);
    double ui = p.u[i];
    double yi = 0.0;
    if (std::abs(ui) > thresh) yi = (ui > 0 ? ui - thresh : ui + thresh) / a;
    sol.y[i] = yi;
    if (yi != 0.0) {
      for (int j : rows_of_col[i]) sol.q(j, 0) = w_of[j] * yi > 0 ? 1.0 : -1.0;
    } else {
      std::vector<double> w;
      for (int j : rows_of_col[i]) w.push_back(w_of[j]);
      auto q = detail::min_norm_box_slack(w, ui);
      for (size_t k = 0; k < w.size(); ++k) sol.q(rows_of_col[i][k], 0) = q[k];
    }
  }
  sol.converged = true;
  sol.iterations = 0;
  sol.residuals = residuals(p, sol.y, sol.q);
  return sol;
}

}  // namespace tvvi
