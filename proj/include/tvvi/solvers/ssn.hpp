#pragma once

#include <Eigen/SparseCholesky>
#include <cmath>
#include <optional>

#include "tvvi/core/solution.hpp"

namespace tvvi {

struct SSNConfig {
  double gamma = 1e3;    // Huber smoothing parameter
  double tol = 1e-10;    // |F(y)|_2 <= tol * (1 + |u|_2)
  int max_iter = 100;
  double damping = 0.5;  // backtracking factor for the residual line search
};

namespace detail {

// H_gamma(w)_j = gamma w_j / max(1, gamma |w_j|), rowwise on an m x d array.
inline dmat huber_map(const dmat& W, double gamma) {
  dmat Q(W.rows(), W.cols());
  for (int j = 0; j < W.rows(); ++j) {
    double nw = W.row(j).norm();
    Q.row(j) = W.row(j) * (gamma / std::max(1.0, gamma * nw));
  }
  return Q;
}

inline dvec ssn_residual(const VIProblem& p, const dvec& y, double gamma) {
  return p.A() * y + apply_Kt(p, huber_map(apply_K(p, y), gamma)) - p.u;
}

}  // namespace detail

// Semismooth Newton on A y + K* H_gamma(K y) = u with a residual-norm line
// search. The Newton matrix uses the generalized derivative of H_gamma:
// gamma I on the smoothed cells, (1/|w|)(I - w w^T/|w|^2) where gamma|w| > 1.
inline VISolution solve_vi_ssn(const VIProblem& p, const SSNConfig& cfg = {},
                               std::optional<dvec> y0 = std::nullopt) {
  const int n = p.n(), m = p.m(), d = p.d();
  dvec y = y0 && y0->size() == n ? *y0 : dvec::Zero(n);
  const double stop = cfg.tol * (1.0 + p.u.norm());

  dvec F = detail::ssn_residual(p, y, cfg.gamma);
  double r = F.norm();
  int it = 0;
  for (; it < cfg.max_iter && r > stop; ++it) {
    dmat W = apply_K(p, y);
    // D(:,a,b): cell-diagonal of the derivative block row a, col b
    dmat Dv(m, d * d);
    for (int j = 0; j < m; ++j) {
      double nw = W.row(j).norm();
      if (cfg.gamma * nw <= 1.0) {
        for (int a = 0; a < d; ++a)
          for (int b = 0; b < d; ++b) Dv(j, a * d + b) = a == b ? cfg.gamma : 0.0;
      } else {
        for (int a = 0; a < d; ++a)
          for (int b = 0; b < d; ++b)
            Dv(j, a * d + b) = ((a == b ? 1.0 : 0.0) - W(j, a) * W(j, b) / (nw * nw)) / nw;
      }
    }
    SpMat B = p.A();
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) {
        SpMat Db(m, m);
        Db.reserve(Eigen::VectorXi::Constant(m, 1));
        for (int j = 0; j < m; ++j)
          if (Dv(j, a * d + b) != 0.0) Db.insert(j, j) = Dv(j, a * d + b);
        B += SpMat(p.Ks()[a].transpose() * (Db * p.Ks()[b]));
      }
    Eigen::SimplicialLDLT<SpMat> ldlt(B);
    if (ldlt.info() != Eigen::Success) throw SingularSystem("SSN Newton matrix factorization failed");
    dvec dy = ldlt.solve(-F);

    double s = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      dvec yt = y + s * dy;
      dvec Ft = detail::ssn_residual(p, yt, cfg.gamma);
      if (Ft.norm() <= (1.0 - 1e-4 * s) * r) {
        y = yt;
        F = Ft;
        r = F.norm();
        accepted = true;
        break;
      }
      s *= cfg.damping;
    }
    if (!accepted) {  // semismooth steps occasionally need the full update
      y += dy;
      F = detail::ssn_residual(p, y, cfg.gamma);
      r = F.norm();
    }
  }
  if (r > stop) throw NoConvergence("SSN did not reach tolerance", it, r);

  VISolution sol;
  sol.y = y;
  // slack recovery: Huber slack clipped to the unit balls, exact on gamma|w| > 1
  dmat W = apply_K(p, y);
  sol.q = detail::huber_map(W, cfg.gamma);
  for (int j = 0; j < m; ++j) {
    double nq = sol.q.row(j).norm();
    if (nq > 1.0) sol.q.row(j) /= nq;
  }
  sol.iterations = it;
  sol.converged = true;
  sol.residuals = residuals(p, sol.y, sol.q);
  return sol;
}

}  // namespace tvvi
