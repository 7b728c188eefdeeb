#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <set>
#include <vector>

#include "tvvi/control/minnorm.hpp"
#include "tvvi/core/problem.hpp"
#include "tvvi/core/solution.hpp"
#include "tvvi/sensitivity/adjoint.hpp"
#include "tvvi/sensitivity/slack.hpp"
#include "tvvi/solvers/pdhg.hpp"
#include "tvvi/solvers/ssn.hpp"
#include "tvvi/stationarity/stationarity.hpp"

namespace tvvi {

struct TRConfig {
  double delta0 = 1.0;
  double delta_min = 1e-6;   // phase switch: radii at or below run the modified step
  double eta1 = 0.25;        // acceptance threshold
  double eta2 = 0.75;        // expansion threshold
  double beta1 = 0.5;        // shrink factor on rejected steps
  double beta2 = 1.3;        // growth factor on very successful steps
  double mu = 1.0;           // fraction of the stationarity-measure decrease to enforce
  double dogleg_beta = 1.0;  // Newton step admissible up to beta * delta
  double dogleg_delta = 0.8; // Newton step must retain this fraction of the Cauchy decrease
  double stop_tol = 1e-4;    // relative step length stop (successful steps only)
  double grad_tol = 1e-14;   // hard stop on a vanishing gradient representative
  double psi_tol = 1e-10;    // stop when the stationarity measure vanishes
  int max_iter = 200;
  int partition_cap = 12;    // largest near-biactive set the modified step will enumerate
  double eps_active = 1e-8;
  double lipschitz = 0.0;    // bound used to flag near-biactive cells; 0 = |A^{-1}| estimate
  bool improve_modified_step = true;  // try a quasi-Newton improvement of the modified step
};

enum class TRPhase { Standard, Modified };
enum class TRStop { Running, GradientZero, StepTolerance, PsiStationary, MaxIterations };

struct TRTraceRow {
  int iter = 0;
  double f = 0.0;
  double grad_norm = 0.0;
  double delta = 0.0;
  double rho = 0.0;
  TRPhase phase = TRPhase::Standard;
  bool accepted = false;
  double psi = std::numeric_limits<double>::quiet_NaN();  // modified phase only
  int bundle_size = 1;  // number of gradient representatives used this iteration
  // |step| / max(1, |u0|): the quantity the relative-step stop rule tests.
  // NaN on rows that stop before attempting a step.
  double step_rel = std::numeric_limits<double>::quiet_NaN();
};

struct TRResult {
  dvec u;
  VISolution sol;
  double f = 0.0;
  dvec gradient;  // last gradient representative
  int iterations = 0;
  TRStop stop = TRStop::Running;
  std::vector<TRTraceRow> trace;
};

// Lower-level solution map: u (packaged as a problem) -> VI solution, with an
// optional warm start from the previous iterate.
using SolutionMap = std::function<VISolution(const VIProblem&, const VISolution*)>;

inline SolutionMap make_ssn_solution_map(SSNConfig cfg = {}) {
  return [cfg](const VIProblem& p, const VISolution* warm) {
    std::optional<dvec> y0;
    if (warm) y0 = warm->y;
    return solve_vi_ssn(p, cfg, y0);
  };
}

inline SolutionMap make_pdhg_solution_map(PDHGConfig cfg = {}) {
  return [cfg](const VIProblem& p, const VISolution* warm) {
    std::optional<VISolution> w;
    if (warm) w = *warm;
    return solve_vi_pdhg(p, cfg, w);
  };
}

struct DoglegStep {
  dvec s;
  double predicted = 0.0;  // -g's - 1/2 s'Hs
  bool newton = false;
};

// Dogleg choice between the Cauchy point and the quasi-Newton step: the
// quasi-Newton step wins when it fits in beta * delta and keeps at least the
// fraction `accept` of the Cauchy model decrease.
inline DoglegStep dogleg_step(const dvec& g, const dmat& H, const dmat& H_inv, double delta,
                              double beta = 1.0, double accept = 0.8) {
  if (delta <= 0.0) throw StepSizeInvalid("trust-region radius must be positive");
  const double gn = g.norm();
  if (gn == 0.0) throw StepSizeInvalid("dogleg step undefined for a zero gradient");

  auto predicted = [&](const dvec& s) { return -g.dot(s) - 0.5 * s.dot(H * s); };

  const double ghg = g.dot(H * g);
  double t = (ghg <= 0.0) ? delta / gn : std::min(gn * gn / ghg, delta / gn);
  DoglegStep cauchy;
  cauchy.s = -t * g;
  cauchy.predicted = predicted(cauchy.s);

  dvec sn = -(H_inv * g);
  if (sn.allFinite() && sn.norm() <= beta * delta) {
    double pn = predicted(sn);
    if (pn >= accept * cauchy.predicted) {
      DoglegStep out;
      out.s = std::move(sn);
      out.predicted = pn;
      out.newton = true;
      return out;
    }
  }
  return cauchy;
}

// BFGS update of the model Hessian and its inverse with the usual curvature
// guard; returns false when the pair is skipped.
inline bool bfgs_update(dmat& H, dmat& H_inv, const dvec& s, const dvec& z) {
  const double sz = s.dot(z);
  if (!(sz > 1e-12 * s.norm() * z.norm())) return false;
  dvec v = H * s;
  const double svs = s.dot(v);
  if (svs <= 0.0) return false;
  H.noalias() -= (v * v.transpose()) / svs;
  H.noalias() += (z * z.transpose()) / sz;
  // Sherman-Morrison pair for the inverse: (I - s z'/sz) H_inv (I - z s'/sz) + s s'/sz
  dvec w = H_inv * z;
  const double zwz = z.dot(w);
  dmat sw = s * w.transpose();
  H_inv.noalias() -= sw / sz;
  H_inv.noalias() -= sw.transpose() / sz;
  H_inv.noalias() += ((1.0 + zwz / sz) / sz) * (s * s.transpose());
  return true;
}

// Stationarity measure of a finite gradient bundle: distance from the origin
// to the convex hull of the columns of G.
inline MinNormPoint psi_measure(const dmat& G, double tol = 1e-10) { return min_norm_point(G, tol); }

struct PossibleBiactive {
  std::vector<int> possible;       // cells that could be biactive within the radius
  std::vector<int> surely_active;  // cells whose multiplier stays strictly inside the ball
};

// Splits the cells by what a radius-delta control move can change, given a
// Lipschitz bound L on the state response: `possible` collects cells whose
// activity pattern is ambiguous, `surely_active` those pinned at zero.
inline PossibleBiactive identify_possible_biactive(const VIProblem& p, const VISolution& sol,
                                                   double delta, double L) {
  PossibleBiactive out;
  dmat W = apply_K(p, sol.y);
  const double thresh = L * delta;
  for (int j = 0; j < W.rows(); ++j) {
    if (W.row(j).norm() > thresh) continue;  // stays inactive or keeps a nonzero cell value
    if (sol.q.row(j).norm() >= 1.0 - thresh)
      out.possible.push_back(j);
    else
      out.surely_active.push_back(j);
  }
  return out;
}

// Gradient representatives for every hypothesis about which ambiguous cells
// end up active: a subset of `possible` gets zero-enforced, the rest of
// `possible` is released (curvature row when the cell value supports it,
// span row otherwise), and cells outside the ambiguous set keep their
// classification. Coinciding systems are solved once.
inline dmat biactive_gradient_bundle(const VIProblem& p, const VISolution& sol,
                                     const PossibleBiactive& split, const dvec& grad_y,
                                     const dvec& grad_u, int cap, double eps_active = 1e-8,
                                     double* worst_residual = nullptr) {
  const int nb = static_cast<int>(split.possible.size());
  if (nb > cap) throw PartitionCapExceeded("near-biactive enumeration too large", nb, cap);

  dmat W = apply_K(p, sol.y);
  std::vector<int> base_zero = split.surely_active;
  std::vector<int> base_formula;
  {
    std::set<int> tagged(split.possible.begin(), split.possible.end());
    tagged.insert(split.surely_active.begin(), split.surely_active.end());
    for (int j = 0; j < W.rows(); ++j) {
      if (tagged.count(j)) continue;
      if (W.row(j).norm() > eps_active)
        base_formula.push_back(j);
      else
        base_zero.push_back(j);
    }
  }

  std::set<std::pair<std::vector<int>, std::vector<int>>> seen;
  std::vector<dvec> grads;
  double worst = 0.0;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << nb); ++mask) {
    BlockSystemSpec spec;
    spec.zero_blocks = base_zero;
    spec.formula_blocks = base_formula;
    for (int k = 0; k < nb; ++k) {
      int j = split.possible[k];
      if (mask & (std::uint64_t{1} << k))
        spec.zero_blocks.push_back(j);
      else if (W.row(j).norm() > eps_active)
        spec.formula_blocks.push_back(j);
      else
        spec.span_blocks.push_back(j);
    }
    std::sort(spec.zero_blocks.begin(), spec.zero_blocks.end());
    std::sort(spec.formula_blocks.begin(), spec.formula_blocks.end());
    std::sort(spec.span_blocks.begin(), spec.span_blocks.end());
    if (!seen.insert({spec.zero_blocks, spec.span_blocks}).second) continue;
    spec.span_dirs = detail::unit_rows(sol.q, spec.span_blocks);
    spec.W = W;
    auto saddle = solve_block_kkt(p, spec, grad_y);
    worst = std::max(worst, saddle.residual);
    grads.push_back(dvec(saddle.eta + grad_u));
  }
  if (worst_residual) *worst_residual = worst;
  dmat G(p.n(), static_cast<int>(grads.size()));
  for (size_t c = 0; c < grads.size(); ++c) G.col(c) = grads[c];
  return G;
}

struct ModifiedStep {
  dvec s;
  double zeta = 0.0;       // max_j <g_j, s>, the linear model of the worst decrease
  double predicted = 0.0;  // -zeta - 1/2 s'Hs
  double psi = 0.0;
  dvec hull_point;
  bool improved = false;  // quasi-Newton improvement accepted
};

// Step for radii at or below the phase switch: move along the negative
// min-norm element of the gradient bundle, scaled so the quadratic term
// cannot eat the linear decrease, with an optional quasi-Newton improvement
// accepted only when it beats the guaranteed decrease.
inline ModifiedStep modified_subproblem(const dmat& G, const dmat& H, const dmat& H_inv,
                                        double delta, double mu, bool improve = true,
                                        double psi_tol = 1e-10,
                                        const MinNormPoint* precomputed = nullptr) {
  ModifiedStep out;
  MinNormPoint mn = precomputed ? *precomputed : psi_measure(G);
  out.psi = mn.norm;
  out.hull_point = mn.point;
  if (out.psi <= psi_tol)
    throw DegeneratePsiZero("stationarity measure vanishes; no descent direction");

  const double hnorm = linalg::power_iteration(
      [&](const dvec& x) { return dvec(H * x); }, static_cast<int>(H.rows()));
  const double t = (delta * hnorm <= out.psi) ? 1.0 : out.psi / (delta * hnorm);
  out.s = -(t * delta / out.psi) * mn.point;
  auto zeta_of = [&](const dvec& s) {
    double z = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < G.cols(); ++j) z = std::max(z, G.col(j).dot(s));
    return z;
  };
  out.zeta = zeta_of(out.s);
  out.predicted = -out.zeta - 0.5 * out.s.dot(H * out.s);

  const double guaranteed =
      0.5 * mu * out.psi * ((hnorm > 0.0) ? std::min(delta, out.psi / hnorm) : delta);
  if (improve) {
    dvec sn = -(H_inv * mn.point);
    if (sn.allFinite()) {
      double sn_norm = sn.norm();
      if (sn_norm > delta) sn *= delta / sn_norm;
      double zn = zeta_of(sn);
      double pn = -zn - 0.5 * sn.dot(H * sn);
      if (pn > out.predicted && pn >= guaranteed) {
        out.s = std::move(sn);
        out.zeta = zn;
        out.predicted = pn;
        out.improved = true;
      }
    }
  }
  if (out.predicted + 1e-9 * std::max(1.0, std::abs(out.predicted)) < guaranteed)
    throw Error("modified step lost the guaranteed model decrease");
  return out;
}

// Clarke-type gradient representative from the conservative partition that
// zero-enforces every biactive cell.
inline dvec generalized_gradient(const VIProblem& p, const VISolution& sol, const IndexSets& sets,
                                 const dvec& grad_y, const dvec& grad_u,
                                 double* system_residual = nullptr) {
  BiactivePartition part{sets.biactive, {}};
  auto adj = adjoint_solve(p, sol, sets, part, grad_y);
  if (system_residual) *system_residual = adj.system_residual;
  return dvec(adj.p + grad_u);
}

// Two-phase trust-region descent on f(u) = J(S(u), u): dogleg steps on a
// BFGS model while the radius is above delta_min, bundle-based modified steps
// below it. The radius update never lifts a rejected radius and floors
// accepted radii at delta_min.
inline TRResult tr_optimize(const std::shared_ptr<const Operators>& ops, const dvec& u0,
                            const CostFunction& J, const TRConfig& cfg = {},
                            const SolutionMap& solve = make_ssn_solution_map()) {
  TRResult res;
  res.u = u0;
  const double L = (cfg.lipschitz > 0.0) ? cfg.lipschitz : ops->norm_Ainv;

  VIProblem prob(ops, res.u);
  res.sol = solve(prob, nullptr);
  res.f = J.value(res.sol.y, res.u);

  const int n = static_cast<int>(u0.size());
  dmat H = dmat::Identity(n, n);
  dmat H_inv = dmat::Identity(n, n);
  double delta = cfg.delta0;
  const double u_scale = std::max(1.0, u0.norm());

  bool have_pair = false;
  bool model_scaled = false;
  dvec prev_step, prev_grad;

  for (int k = 0; k < cfg.max_iter; ++k) {
    // classification slack: least-norm selection is stable against the
    // solver-dependent multiplier returned by the lower-level method
    try {
      auto sel = min_euclidean_slack(prob, res.sol.y, cfg.eps_active);
      res.sol.q = sel.q;
    } catch (const Infeasible&) {
      // keep the solver multiplier when the projection problem degenerates
    }
    IndexSets sets = classify_sets(prob, res.sol, cfg.eps_active);
    dvec gy = J.grad_y(res.sol.y, res.u);
    dvec gu = J.grad_u(res.sol.y, res.u);
    dvec g = generalized_gradient(prob, res.sol, sets, gy, gu);
    if (have_pair) {
      dvec z = g - prev_grad;
      const double sz = prev_step.dot(z);
      if (!model_scaled && sz > 0.0) {
        // set the identity model to the measured curvature scale before the
        // first update; quasi-Newton steps are useless until the magnitude
        // is right, and on stiff problems that costs a long Cauchy-only tail
        const double zz = z.squaredNorm();
        H *= zz / sz;
        H_inv *= sz / zz;
        model_scaled = true;
      }
      bfgs_update(H, H_inv, prev_step, z);
    }
    have_pair = false;
    res.gradient = g;

    TRTraceRow row;
    row.iter = k;
    row.f = res.f;
    row.grad_norm = g.norm();
    row.delta = delta;

    if (g.norm() <= cfg.grad_tol) {
      res.trace.push_back(row);
      res.stop = TRStop::GradientZero;
      res.iterations = k;
      return res;
    }

    dvec step;
    double predicted = 0.0;
    bool gate_open = true;
    if (delta > cfg.delta_min) {
      row.phase = TRPhase::Standard;
      auto dog = dogleg_step(g, H, H_inv, delta, cfg.dogleg_beta, cfg.dogleg_delta);
      step = dog.s;
      predicted = dog.predicted;
    } else {
      row.phase = TRPhase::Modified;
      auto split = identify_possible_biactive(prob, res.sol, delta, L);
      dmat G = biactive_gradient_bundle(prob, res.sol, split, gy, gu, cfg.partition_cap,
                                        cfg.eps_active);
      row.bundle_size = static_cast<int>(G.cols());
      MinNormPoint probe = psi_measure(G);
      row.psi = probe.norm;
      if (probe.norm <= cfg.psi_tol) {
        res.trace.push_back(row);
        res.stop = TRStop::PsiStationary;
        res.iterations = k;
        return res;
      }
      auto mod = modified_subproblem(G, H, H_inv, delta, cfg.mu, cfg.improve_modified_step,
                                     cfg.psi_tol, &probe);
      step = mod.s;
      predicted = mod.predicted;
      // reject the ratio test when the measure is too small for the radius:
      // the model cannot be trusted to separate descent from noise
      gate_open = probe.norm > g.norm() * delta;
    }

    row.step_rel = step.norm() / u_scale;
    dvec u_trial = res.u + step;
    VIProblem prob_trial(ops, u_trial);
    // a trial point the lower-level solver cannot evaluate is a rejection:
    // the shrunk radius moves the next trial back toward the warm start
    bool evaluated = true;
    VISolution sol_trial;
    try {
      sol_trial = solve(prob_trial, &res.sol);
    } catch (const NoConvergence&) {
      evaluated = false;
    }
    const double f_trial = evaluated ? J.value(sol_trial.y, u_trial) : res.f;
    const double actual = res.f - f_trial;
    double rho = 0.0;
    if (evaluated && gate_open && predicted > 1e-14 * std::max(1.0, std::abs(res.f)))
      rho = actual / predicted;
    row.rho = rho;
    row.accepted = rho > cfg.eta1;
    res.trace.push_back(row);

    if (row.accepted) {
      res.u = u_trial;
      prob = prob_trial;
      res.sol = sol_trial;
      res.f = f_trial;
      prev_step = step;
      prev_grad = g;
      have_pair = true;
      delta = (rho > cfg.eta2) ? std::max(cfg.delta_min, cfg.beta2 * delta)
                               : std::max(cfg.delta_min, delta);
    } else {
      delta = cfg.beta1 * delta;
    }
    // the descent is over once its resolution falls below the requested one:
    // the trial step is already that short (accepted or not), or the shrunk
    // radius caps every future trial step below it. Without the rejected
    // cases an interior quasi-Newton step that fails the ratio test is
    // re-proposed unchanged until the radius collapses.
    if (step.norm() <= cfg.stop_tol * u_scale ||
        (!row.accepted && delta <= cfg.stop_tol * u_scale)) {
      res.stop = TRStop::StepTolerance;
      res.iterations = k + 1;
      return res;
    }
  }
  res.stop = TRStop::MaxIterations;
  res.iterations = cfg.max_iter;
  return res;
}

}  // namespace tvvi
