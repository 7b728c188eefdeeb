#pragma once

#include <Eigen/SparseCholesky>
#include <optional>
#include <vector>

#include "tvvi/core/solution.hpp"

namespace tvvi {

struct PDHGConfig {
  double tau = 0.0;    // 0: choose automatically from |K|
  double sigma = 0.0;
  double tol = 1e-9;   // residual stop, scaled by 1 + |u|_2
  int max_iter = 400000;
  int check_every = 25;
  bool track_avg_energy = false;  // energy of the running primal mean (diagnostic)
};

struct PDHGDiagnostics {
  std::vector<double> avg_energy;  // sampled at residual checks
};

// Primal-dual hybrid gradient with extrapolation parameter 1:
//   y+ = (A + I/tau)^{-1} (y/tau + u - K* q)
//   q+ = proj_balls(q + sigma K (2 y+ - y))
// Requires tau sigma |K|^2 < 1.
inline VISolution solve_vi_pdhg(const VIProblem& p, const PDHGConfig& cfg = {},
                                std::optional<VISolution> warm = std::nullopt,
                                PDHGDiagnostics* diag = nullptr) {
  const int n = p.n(), m = p.m();
  double nk = std::max(p.ops->norm_K, 1e-300);
  double tau = cfg.tau > 0 ? cfg.tau : 0.99 / nk;
  double sigma = cfg.sigma > 0 ? cfg.sigma : 0.99 / nk;
  if (tau * sigma * nk * nk >= 1.0)
    throw StepSizeInvalid("PDHG requires tau*sigma*|K|^2 < 1");

  SpMat M = p.A();
  for (int i = 0; i < n; ++i) M.coeffRef(i, i) += 1.0 / tau;
  Eigen::SimplicialLDLT<SpMat> ldlt(M);
  if (ldlt.info() != Eigen::Success) throw SingularSystem("PDHG prox factorization failed");

  dvec y = warm ? warm->y : dvec::Zero(n);
  dmat q = warm ? warm->q : dmat::Zero(m, p.d());
  const double stop = cfg.tol * (1.0 + p.u.norm());

  dvec y_sum = dvec::Zero(n);
  VISolution sol;
  for (int it = 1; it <= cfg.max_iter; ++it) {
    dvec y_new = ldlt.solve(y / tau + p.u - apply_Kt(p, q));
    dmat q_arg = q + sigma * apply_K(p, dvec(2.0 * y_new - y));
    for (int j = 0; j < m; ++j) {
      double nq = q_arg.row(j).norm();
      if (nq > 1.0) q_arg.row(j) /= nq;
    }
    y = y_new;
    q = q_arg;
    if (cfg.track_avg_energy) y_sum += y;

    if (it % cfg.check_every == 0 || it == cfg.max_iter) {
      auto r = residuals(p, y, q);
      if (diag && cfg.track_avg_energy)
        diag->avg_energy.push_back(energy(p, dvec(y_sum / it)));
      if (r.max() <= stop) {
        sol.y = y;
        sol.q = q;
        sol.iterations = it;
        sol.converged = true;
        sol.residuals = r;
        return sol;
      }
    }
  }
  throw NoConvergence("PDHG did not reach tolerance", cfg.max_iter,
                      residuals(p, y, q).max());
}

}  // namespace tvvi
