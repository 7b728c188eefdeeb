#pragma once

#include <vector>

#include "tvvi/core/solution.hpp"
#include "tvvi/util/linalg.hpp"

namespace tvvi {

// Generator description of the critical cone K(y): its lineality space
// L = {v : (Kv)_j = 0 on A_s union B} handled implicitly through a range test,
// plus one ray representative per biactive cell (least-squares solution of
// (Kv)_jb = q_jb, (Kv)_j = 0 elsewhere on the active set). Rays for which no
// representative exists are marked infeasible and skipped by callers; the
// resulting certificate is sound but may be incomplete on such cells.
struct ConeGenerators {
  std::vector<int> zero_set;  // A_s union B
  struct Ray {
    int cell = -1;
    dvec v;
    bool feasible = false;
    double fit_residual = 0.0;
  };
  std::vector<Ray> rays;
};

namespace detail {

inline dmat masked_K(const VIProblem& p, const dvec& v, const std::vector<int>& cells) {
  dmat W = apply_K(p, v);
  dmat out(static_cast<int>(cells.size()), p.d());
  for (size_t k = 0; k < cells.size(); ++k) out.row(static_cast<int>(k)) = W.row(cells[k]);
  return out;
}

inline dvec masked_Kt(const VIProblem& p, const dmat& x, const std::vector<int>& cells) {
  dmat full = dmat::Zero(p.m(), p.d());
  for (size_t k = 0; k < cells.size(); ++k) full.row(cells[k]) = x.row(static_cast<int>(k));
  return apply_Kt(p, full);
}

inline dvec flatten(const dmat& x) {
  dvec out(x.size());
  int idx = 0;
  for (int j = 0; j < x.rows(); ++j)
    for (int c = 0; c < x.cols(); ++c) out[idx++] = x(j, c);
  return out;
}

inline dmat unflatten(const dvec& v, int rows, int cols) {
  dmat out(rows, cols);
  int idx = 0;
  for (int j = 0; j < rows; ++j)
    for (int c = 0; c < cols; ++c) out(j, c) = v[idx++];
  return out;
}

}  // namespace detail

inline ConeGenerators build_cone_generators(const VIProblem& p, const IndexSets& sets,
                                            const dmat& q, double fit_tol = 1e-8) {
  ConeGenerators g;
  g.zero_set = sets.strongly_active;
  g.zero_set.insert(g.zero_set.end(), sets.biactive.begin(), sets.biactive.end());
  std::sort(g.zero_set.begin(), g.zero_set.end());

  for (int jb : sets.biactive) {
    ConeGenerators::Ray ray;
    ray.cell = jb;
    dvec dir = q.row(jb).transpose();
    double nd = dir.norm();
    if (nd > 0) dir /= nd;
    // constraint cells: zero everywhere on the active set except jb -> dir
    std::vector<int> cells = g.zero_set;
    dmat target = dmat::Zero(static_cast<int>(cells.size()), p.d());
    for (size_t k = 0; k < cells.size(); ++k)
      if (cells[k] == jb) target.row(static_cast<int>(k)) = dir.transpose();
    auto op = [&](const dvec& v) {
      return detail::masked_Kt(p, detail::masked_K(p, v, cells), cells);
    };
    dvec rhs = detail::masked_Kt(p, target, cells);
    bool conv = false;
    dvec v = linalg::cg_consistent(op, rhs, 1e-12, 400 + 4 * p.n(), &conv);
    dmat fit = detail::masked_K(p, v, cells) - target;
    ray.fit_residual = fit.cwiseAbs().maxCoeff();
    ray.feasible = ray.fit_residual <= fit_tol;
    ray.v = v;
    g.rays.push_back(std::move(ray));
  }
  return g;
}

// |component of r orthogonal to range(K_zero^T)|: zero iff <r, v> = 0 for all
// v in the lineality space.
inline double lineality_orthogonality_violation(const VIProblem& p,
                                                const ConeGenerators& g, const dvec& r) {
  if (g.zero_set.empty()) return r.norm();
  auto op = [&](const dvec& zf) {
    dmat z = detail::unflatten(zf, static_cast<int>(g.zero_set.size()), p.d());
    return detail::flatten(detail::masked_K(p, detail::masked_Kt(p, z, g.zero_set), g.zero_set));
  };
  dvec rhs = detail::flatten(detail::masked_K(p, r, g.zero_set));
  bool conv = false;
  dvec zf = linalg::cg_consistent(op, rhs, 1e-12,
                                  400 + 4 * static_cast<int>(rhs.size()), &conv);
  dmat z = detail::unflatten(zf, static_cast<int>(g.zero_set.size()), p.d());
  return (detail::masked_Kt(p, z, g.zero_set) - r).norm();
}

}  // namespace tvvi
