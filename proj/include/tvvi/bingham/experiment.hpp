#pragma once

#include <vector>

#include "tvvi/bingham/grid.hpp"
#include "tvvi/control/tr.hpp"

namespace tvvi {

// Optimal control of a laminar Bingham flow in a square duct: the state
// solves the plug-bearing flow problem, the cost tracks a constant target
// velocity with a quadratic control penalty.
struct BinghamConfig {
  GridSpec grid;
  double alpha = 5e-4;           // control penalty weight
  double target_value = 1.0;     // constant target state
  double initial_control = 10.0; // constant initial control
  enum class Lower { SSN, PDHG } lower = Lower::SSN;
  SSNConfig ssn;
  PDHGConfig pdhg;
  TRConfig tr;
  // Classification width for the index sets inside the descent loop; 0 picks
  // the smoothing-consistent width 1/gamma for the semismooth lower solver
  // and a tight width for the exact first-order one.
  double classification_eps = 0.0;
};

struct BinghamRun {
  GridSpec grid;
  double alpha = 0.0;
  int gradient_variant = 0;
  double initial_cost = 0.0;
  double classification_eps = 0.0;
  TRResult result;
  dvec adjoint;  // adjoint state at the final control (conservative partition)
  std::shared_ptr<const Operators> ops;
};

// Width used to read index sets off the lower-level solution: the semismooth
// solver leaves an O(1/gamma) footprint on nominally active cells, so its
// sets are classified at that scale; the first-order solver is exact and
// gets a tight width.
inline double effective_classification_eps(const BinghamConfig& cfg) {
  if (cfg.classification_eps > 0.0) return cfg.classification_eps;
  return cfg.lower == BinghamConfig::Lower::SSN ? 1.0 / cfg.ssn.gamma : 1e-8;
}

inline BinghamRun run_bingham_experiment(const BinghamConfig& cfg) {
  BinghamRun run;
  run.grid = cfg.grid;
  run.alpha = cfg.alpha;
  run.ops = bingham_operators(cfg.grid, &run.gradient_variant);

  const int n = cfg.grid.node_count();
  dvec u0 = dvec::Constant(n, cfg.initial_control);
  dvec target = dvec::Constant(n, cfg.target_value);
  CostFunction J = tracking_cost(target, cfg.alpha);

  TRConfig tr = cfg.tr;
  tr.eps_active = effective_classification_eps(cfg);
  run.classification_eps = tr.eps_active;
  SolutionMap lower = cfg.lower == BinghamConfig::Lower::SSN
                          ? make_ssn_solution_map(cfg.ssn)
                          : make_pdhg_solution_map(cfg.pdhg);

  run.result = tr_optimize(run.ops, u0, J, tr, lower);
  run.initial_cost = run.result.trace.empty() ? run.result.f : run.result.trace.front().f;

  // adjoint field at the optimum, after re-selecting the classification slack
  VIProblem prob(run.ops, run.result.u);
  VISolution sol = run.result.sol;
  try {
    sol.q = min_euclidean_slack(prob, sol.y, tr.eps_active).q;
  } catch (const Infeasible&) {
  }
  IndexSets sets = classify_sets(prob, sol, tr.eps_active);
  BiactivePartition part{sets.biactive, {}};
  run.adjoint = adjoint_solve(prob, sol, sets, part, J.grad_y(sol.y, run.result.u)).p;
  return run;
}

// One row per penalty weight, reusing the grid operators across runs by
// construction (each run rebuilds them; the grid is the dominant cost only
// through the descent itself).
inline std::vector<BinghamRun> bingham_alpha_sweep(const BinghamConfig& base,
                                                   const std::vector<double>& alphas) {
  std::vector<BinghamRun> out;
  for (double a : alphas) {
    BinghamConfig cfg = base;
    cfg.alpha = a;
    out.push_back(run_bingham_experiment(cfg));
  }
  return out;
}

}  // namespace tvvi
