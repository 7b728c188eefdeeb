#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "tvvi/sensitivity/generators.hpp"
#include "tvvi/sensitivity/saddle.hpp"
#include "tvvi/sensitivity/slack.hpp"
#include "tvvi/solvers/pdhg.hpp"

namespace tvvi {

struct BiactivePartition {
  std::vector<int> b0;  // cells where (K eta)_j = 0 is enforced
  std::vector<int> b1;  // cells with (K eta)_j in span(q_j)
};

enum class DerivativeKind { Frechet, Directional, Bouligand, Clarke };

struct DerivativeVerification {
  bool checked = false;
  double cone_violation = 0.0;       // violation of eta in K(y)
  double lineality_violation = 0.0;  // |<r, v>| over the lineality space (range test)
  double ray_violation = 0.0;        // max_j (-<r, v_j>)_+ over feasible rays
  double complementarity = 0.0;      // |<r, eta>|
  std::vector<int> skipped_rays;     // biactive cells without a representative
};

struct DerivativeResult {
  dvec eta;
  dmat multiplier;  // theta (lambda) as an m x d array
  DerivativeKind kind = DerivativeKind::Directional;
  BiactivePartition partition;
  double system_residual = 0.0;
  DerivativeVerification verification;
};

struct DirectionalConfig {
  int partition_cap = 20;
  double sign_tol = 1e-9;   // scaled by 1 + |h|
  bool verify = true;
  double verify_tol = 1e-8;
  double eps_active = 1e-8;
};

namespace detail {

inline dmat unit_rows(const dmat& q, const std::vector<int>& cells) {
  dmat out(static_cast<int>(cells.size()), q.cols());
  for (size_t k = 0; k < cells.size(); ++k) {
    dvec v = q.row(cells[k]).transpose();
    double nv = v.norm();
    if (nv > 0) v /= nv;
    out.row(static_cast<int>(k)) = v.transpose();
  }
  return out;
}

inline dvec curvature_apply(const Eigen::RowVectorXd& w, const dvec& x) {
  double nw = w.norm();
  dvec wx = w.transpose();
  return (x - wx * (wx.dot(x) / (nw * nw))) / nw;
}
inline DerivativeVerification verify_derivative(const VIProblem& p, const dmat& W,
                                                const IndexSets& sets, const dmat& q,
                                                const dvec& h, const dvec& eta,
                                                double tol) {
  DerivativeVerification v;
  v.checked = true;
  auto cone = cone_membership(p, eta, critical_cone_spec(sets, q), tol * (1.0 + h.norm()));
  v.cone_violation = cone.max_violation;

  dmat We = apply_K(p, eta);
  dmat theta = dmat::Zero(p.m(), p.d());
  for (int j : sets.inactive)
    theta.row(j) = curvature_apply(W.row(j), We.row(j).transpose()).transpose();
  dvec r = p.A() * eta + apply_Kt(p, theta) - h;

  auto gens = build_cone_generators(p, sets, q);
  v.lineality_violation = lineality_orthogonality_violation(p, gens, r);
  for (const auto& ray : gens.rays) {
    if (!ray.feasible) {
      v.skipped_rays.push_back(ray.cell);
      continue;
    }
    v.ray_violation = std::max(v.ray_violation, -r.dot(ray.v));
  }
  v.ray_violation = std::max(v.ray_violation, 0.0);
  v.complementarity = std::abs(r.dot(eta));
  return v;
}
}  // namespace detail

struct FrechetCheckResult {
  bool differentiable = false;
  double r_bar = 1.0;
  dmat q_bar;
};

// Strict complementarity test via the min-l_inf slack problem: differentiable
// iff some feasible slack keeps |q_j| strictly below 1 on the active set.
inline FrechetCheckResult frechet_check(const VIProblem& p, const VISolution& sol,
                                        const MinLinfConfig& cfg = {},
                                        double strictness = 1e-8) {
  auto r = min_linf_slack(p, sol.y, cfg);
  FrechetCheckResult out;
  out.r_bar = r.r_bar;
  out.q_bar = r.q_bar;
  out.differentiable = r.r_bar < 1.0 - strictness;
  return out;
}

// Linear system of the Frechet derivative under strict complementarity:
// zero rows on the whole active set, curvature formula on I.
inline DerivativeResult frechet_derivative(const VIProblem& p, const VISolution& sol,
                                           const IndexSets& sets, const dvec& h) {
  BlockSystemSpec spec;
  spec.formula_blocks = sets.inactive;
  spec.zero_blocks = sets.active;
  spec.W = apply_K(p, sol.y);
  auto s = solve_block_kkt(p, spec, h);
  DerivativeResult out;
  out.eta = std::move(s.eta);
  out.multiplier = std::move(s.theta);
  out.kind = DerivativeKind::Frechet;
  out.system_residual = s.residual;
  return out;
}

// One Bouligand-subdifferential element G(B0,B1) applied to h. No sign
// conditions are imposed; every partition yields an element.
inline DerivativeResult bouligand_element(const VIProblem& p, const VISolution& sol,
                                          const IndexSets& sets,
                                          const BiactivePartition& part, const dvec& h) {
  BlockSystemSpec spec;
  spec.formula_blocks = sets.inactive;
  spec.zero_blocks = sets.strongly_active;
  spec.zero_blocks.insert(spec.zero_blocks.end(), part.b0.begin(), part.b0.end());
  std::sort(spec.zero_blocks.begin(), spec.zero_blocks.end());
  spec.span_blocks = part.b1;
  spec.span_dirs = detail::unit_rows(sol.q, part.b1);
  spec.W = apply_K(p, sol.y);
  auto s = solve_block_kkt(p, spec, h);
  DerivativeResult out;
  out.eta = std::move(s.eta);
  out.multiplier = std::move(s.theta);
  out.kind = DerivativeKind::Bouligand;
  out.partition = part;
  out.system_residual = s.residual;
  return out;
}

// Element of the generalized Jacobian: span treatment on the whole biactive set.
inline DerivativeResult clarke_element(const VIProblem& p, const VISolution& sol,
                                       const IndexSets& sets, const dvec& h) {
  BiactivePartition part;
  part.b1 = sets.biactive;
  auto out = bouligand_element(p, sol, sets, part, h);
  out.kind = DerivativeKind::Clarke;
  return out;
}

// Directional derivative S'(u; h): enumerate biactive partitions in fixed
// bitmask order (bit k set => biactive[k] in B1), accept the first whose KKT
// signs hold: ray coefficients >= -tol on B1, <theta_j, q_j> <= tol on B0.
inline DerivativeResult directional_derivative(const VIProblem& p, const VISolution& sol,
                                               const IndexSets& sets, const dvec& h,
                                               const DirectionalConfig& cfg = {}) {
  const auto& B = sets.biactive;
  const int nb = static_cast<int>(B.size());
  if (nb > cfg.partition_cap)
    throw PartitionCapExceeded("biactive set exceeds partition cap", nb, cfg.partition_cap);
  const double tol = cfg.sign_tol * (1.0 + h.norm());
  dmat W = apply_K(p, sol.y);
  dmat qhat_all = detail::unit_rows(sol.q, B);

  for (long mask = 0; mask < (1L << nb); ++mask) {
    BiactivePartition part;
    for (int k = 0; k < nb; ++k) (mask >> k & 1 ? part.b1 : part.b0).push_back(B[k]);

    BlockSystemSpec spec;
    spec.formula_blocks = sets.inactive;
    spec.zero_blocks = sets.strongly_active;
    spec.zero_blocks.insert(spec.zero_blocks.end(), part.b0.begin(), part.b0.end());
    std::sort(spec.zero_blocks.begin(), spec.zero_blocks.end());
    spec.span_blocks = part.b1;
    spec.span_dirs.resize(static_cast<int>(part.b1.size()), p.d());
    {
      int r = 0;
      for (int k = 0; k < nb; ++k)
        if (mask >> k & 1) spec.span_dirs.row(r++) = qhat_all.row(k);
    }
    spec.W = W;
    auto s = solve_block_kkt(p, spec, h);

    bool ok = true;
    for (int k = 0; k < s.ray_coeff.size() && ok; ++k)
      if (s.ray_coeff[k] < -tol) ok = false;
    for (size_t k = 0; k < part.b0.size() && ok; ++k) {
      int j = part.b0[k];
      dvec qj = sol.q.row(j).transpose();
      double nq = qj.norm();
      if (nq > 0) qj /= nq;
      if (s.theta.row(j).dot(qj) > tol) ok = false;
    }
    if (!ok) continue;

    DerivativeResult out;
    out.eta = std::move(s.eta);
    out.multiplier = std::move(s.theta);
    out.kind = DerivativeKind::Directional;
    out.partition = part;
    out.system_residual = s.residual;
    if (cfg.verify)
      out.verification =
          detail::verify_derivative(p, W, sets, sol.q, h, out.eta, cfg.verify_tol);
    return out;
  }
  throw NoValidPartition("no biactive partition satisfied the multiplier sign conditions");
}

struct LinearRepresentativeResult {
  BiactivePartition partition;
  DerivativeResult directional;
  DerivativeResult element;
  double agreement = 0.0;  // |G h - S'(u;h)|
};

// The subdifferential element that reproduces the directional derivative at h:
// B0 = biactive cells with (K eta)_j = 0, B1 the rest.
inline LinearRepresentativeResult linear_representative(const VIProblem& p,
                                                        const VISolution& sol,
                                                        const IndexSets& sets, const dvec& h,
                                                        const DirectionalConfig& cfg = {}) {
  LinearRepresentativeResult out;
  out.directional = directional_derivative(p, sol, sets, h, cfg);
  dmat We = apply_K(p, out.directional.eta);
  const double tol = 1e-9 * (1.0 + We.cwiseAbs().maxCoeff());
  for (int j : sets.biactive)
    (We.row(j).norm() <= tol ? out.partition.b0 : out.partition.b1).push_back(j);
  out.element = bouligand_element(p, sol, sets, out.partition, h);
  out.agreement = (out.element.eta - out.directional.eta).norm();
  return out;
}

// (S(u + t h) - S(u)) / t with tightly solved states; the perturbed solve is
// warm-started from the base point.
inline dvec difference_quotient(const VIProblem& p, const dvec& h, double t,
                                const PDHGConfig& cfg = {}) {
  VISolution base = solve_vi_pdhg(p, cfg);
  VISolution pert = solve_vi_pdhg(p.with_control(p.u + t * h), cfg, base);
  return (pert.y - base.y) / t;
}

}  // namespace tvvi
