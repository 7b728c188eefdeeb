#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "tvvi/core/problem.hpp"

namespace tvvi {

struct ComplementarityResiduals {
  double state_eq = 0.0;  // |A y + K* q - u|_2
  double comp = 0.0;      // max_j |<q_j,(Ky)_j>| - |(Ky)_j||
  double feas = 0.0;      // max_j (|q_j| - 1)_+

  double max() const { return std::max(state_eq, std::max(comp, feas)); }
  bool all_below(double tol) const { return max() <= tol; }
};

struct VISolution {
  dvec y;
  dmat q;  // m x d
  int iterations = 0;
  bool converged = false;
  ComplementarityResiduals residuals;
};

inline ComplementarityResiduals residuals(const VIProblem& p, const dvec& y, const dmat& q) {
  ComplementarityResiduals r;
  r.state_eq = (p.A() * y + apply_Kt(p, q) - p.u).norm();
  dmat W = apply_K(p, y);
  for (int j = 0; j < p.m(); ++j) {
    double nw = W.row(j).norm();
    r.comp = std::max(r.comp, std::abs(q.row(j).dot(W.row(j)) - nw));
    r.feas = std::max(r.feas, q.row(j).norm() - 1.0);
  }
  r.feas = std::max(r.feas, 0.0);
  return r;
}

// 1/2 <y,Ay> - <u,y> + sum_j |(Ky)_j|; the VI solution is its unique minimizer.
inline double energy(const VIProblem& p, const dvec& y) {
  return 0.5 * y.dot(dvec(p.A() * y)) - p.u.dot(y) + cell_norms(apply_K(p, y)).sum();
}

// Cell classification at a solution pair. With eps = 0 this is the exact
// partition; the default 1e-8 absorbs solver noise in both |Ky| and |q|.
struct IndexSets {
  std::vector<int> inactive;         // I:   |(Ky)_j| >  eps
  std::vector<int> active;           // A:   complement of I
  std::vector<int> strongly_active;  // A_s: j in A with |q_j| <  1 - eps
  std::vector<int> biactive;         // B:   j in A with |q_j| >= 1 - eps
  double eps = 0.0;
};

inline IndexSets classify_sets(const VIProblem& p, const VISolution& sol,
                               double eps_active = 1e-8) {
  IndexSets s;
  s.eps = eps_active;
  dmat W = apply_K(p, sol.y);
  for (int j = 0; j < p.m(); ++j) {
    if (W.row(j).norm() > eps_active) {
      s.inactive.push_back(j);
    } else {
      s.active.push_back(j);
      if (sol.q.row(j).norm() < 1.0 - eps_active)
        s.strongly_active.push_back(j);
      else
        s.biactive.push_back(j);
    }
  }
  return s;
}

// Description of the critical cone K(y): (Kv)_j = 0 on zero_blocks and
// (Kv)_j in cone{q_j} (or span{q_j} in Line mode) on ray_blocks.
struct ConeSpec {
  enum class RayMode { Cone, Line };
  std::vector<int> zero_blocks;
  std::vector<int> ray_blocks;
  dmat ray_dirs;  // |ray_blocks| x d unit rows, aligned with ray_blocks
  RayMode mode = RayMode::Cone;
};

inline ConeSpec critical_cone_spec(const IndexSets& sets, const dmat& q) {
  ConeSpec c;
  c.zero_blocks = sets.strongly_active;
  c.ray_blocks = sets.biactive;
  c.ray_dirs.resize(static_cast<int>(sets.biactive.size()), q.cols());
  for (size_t k = 0; k < sets.biactive.size(); ++k) {
    dvec dir = q.row(sets.biactive[k]).transpose();
    double nq = dir.norm();
    c.ray_dirs.row(static_cast<int>(k)) = (nq > 0 ? dir / nq : dir).transpose();
  }
  return c;
}

struct ConeMembership {
  bool member = true;
  double max_violation = 0.0;
  std::vector<std::pair<int, double>> violations;  // (cell, violation) above tol
};

inline ConeMembership cone_membership(const VIProblem& p, const dvec& v,
                                      const ConeSpec& spec, double tol = 1e-9) {
  ConeMembership out;
  dmat W = apply_K(p, v);
  auto record = [&](int j, double viol) {
    out.max_violation = std::max(out.max_violation, viol);
    if (viol > tol) {
      out.member = false;
      out.violations.emplace_back(j, viol);
    }
  };
  for (int j : spec.zero_blocks) record(j, W.row(j).norm());
  for (size_t k = 0; k < spec.ray_blocks.size(); ++k) {
    int j = spec.ray_blocks[k];
    double along = spec.ray_dirs.row(static_cast<int>(k)).dot(W.row(j));
    if (spec.mode == ConeSpec::RayMode::Cone) {
      // <q_j,(Kv)_j> = |(Kv)_j| within tol, i.e. the block sits on the ray
      record(j, W.row(j).norm() - along);
    } else {
      dvec resid = W.row(j).transpose() - along * spec.ray_dirs.row(static_cast<int>(k)).transpose();
      record(j, resid.norm());
    }
  }
  return out;
}

}  // namespace tvvi
