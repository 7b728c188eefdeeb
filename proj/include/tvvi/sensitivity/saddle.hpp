#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <vector>

#include "tvvi/core/solution.hpp"

namespace tvvi {

// Index structure of the piecewise-linear systems behind directional
// derivatives, subdifferential elements and adjoints:
//   A eta + K^T theta = rhs
//   theta_j = (1/|w_j|)(I - w_j w_j^T/|w_j|^2) (K eta)_j   on formula_blocks
//   (K eta)_j = 0                                          on zero_blocks
//   (K eta)_j in span(dir_j), <theta_j, dir_j> = 0         on span_blocks
// Cells in none of the lists have theta_j = 0 and (K eta)_j free.
struct BlockSystemSpec {
  std::vector<int> formula_blocks;
  std::vector<int> zero_blocks;
  std::vector<int> span_blocks;
  dmat span_dirs;  // |span_blocks| x d unit rows
  dmat W;          // m x d cell gradients (K y); rows read on formula_blocks only
};

struct SaddleResult {
  dvec eta;
  dmat theta;      // m x d, assembled over all block kinds
  dvec ray_coeff;  // <dir_j, (K eta)_j> per span block
  double residual = 0.0;  // inf-norm residual of the unregularized KKT system
  int refinement_steps = 0;
};

namespace detail {

// Orthonormal basis of the complement of a unit vector (d x (d-1)).
inline dmat complement_basis(const dvec& q) {
  const int d = static_cast<int>(q.size());
  if (d == 1) return dmat(1, 0);
  dmat M(d, 1);
  M.col(0) = q;
  Eigen::HouseholderQR<dmat> qr(M);
  dmat Q = qr.householderQ();
  dmat out = Q.rightCols(d - 1);
  return out;
}

inline dmat curvature_block(const Eigen::RowVectorXd& w) {
  const int d = static_cast<int>(w.size());
  double nw = w.norm();
  dmat T = dmat::Identity(d, d) - w.transpose() * w / (nw * nw);
  return T / nw;
}

}  // namespace detail

// Solves the symmetric saddle system
//   [ M  C^T ] [eta  ]   [rhs]      M = A + sum_formula K_j^T T_j K_j
//   [ C   0  ] [mults] = [ 0 ],     C = zero rows + span-complement rows.
// Constraint rows may be linearly dependent (consistent, zero rhs); the LU of
// a (2,2)-regularized copy preconditions iterative refinement against the
// unregularized operator, so the reported residual is the true one.
inline SaddleResult solve_block_kkt(const VIProblem& p, const BlockSystemSpec& spec,
                                    const dvec& rhs) {
  const int n = p.n(), d = p.d();
  if (rhs.size() != n) throw DimensionMismatch("saddle rhs must have length n");

  // The K blocks are column-major; cell access needs rows, so iterate
  // row-major copies.
  using SpMatR = Eigen::SparseMatrix<double, Eigen::RowMajor>;
  std::vector<SpMatR> Kr(d);
  for (int i = 0; i < d; ++i) Kr[i] = p.Ks()[i];

  // K_j rows as small dense blocks would lose sparsity; build triplets directly.
  std::vector<Triplet> trips;
  SpMat M = p.A();
  for (int j : spec.formula_blocks) {
    dmat T = detail::curvature_block(spec.W.row(j));
    // K_j^T T K_j, using the j-th row of each K_i
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) {
        if (T(a, b) == 0.0) continue;
        for (SpMatR::InnerIterator ia(Kr[a], j); ia; ++ia)
          for (SpMatR::InnerIterator ib(Kr[b], j); ib; ++ib)
            trips.emplace_back(ia.col(), ib.col(), ia.value() * T(a, b) * ib.value());
      }
  }
  {
    SpMat add(n, n);
    add.setFromTriplets(trips.begin(), trips.end());
    M += add;
  }

  const int n_zero = static_cast<int>(spec.zero_blocks.size());
  const int n_span = static_cast<int>(spec.span_blocks.size());
  const int nc = n_zero * d + n_span * (d - 1);
  std::vector<dmat> span_bases(n_span);
  for (int k = 0; k < n_span; ++k)
    span_bases[k] = detail::complement_basis(spec.span_dirs.row(k).transpose());

  const int N = n + nc;
  std::vector<Triplet> kt;
  for (int k = 0; k < M.outerSize(); ++k)
    for (SpMat::InnerIterator it(M, k); it; ++it)
      kt.emplace_back(it.row(), it.col(), it.value());
  int row = n;
  for (int k = 0; k < n_zero; ++k) {
    int j = spec.zero_blocks[k];
    for (int i = 0; i < d; ++i) {
      for (SpMatR::InnerIterator it(Kr[i], j); it; ++it) {
        kt.emplace_back(row, it.col(), it.value());
        kt.emplace_back(it.col(), row, it.value());
      }
      ++row;
    }
  }
  for (int k = 0; k < n_span; ++k) {
    int j = spec.span_blocks[k];
    for (int c = 0; c < d - 1; ++c) {
      for (int i = 0; i < d; ++i) {
        double coef = span_bases[k](i, c);
        if (coef == 0.0) continue;
        for (SpMatR::InnerIterator it(Kr[i], j); it; ++it) {
          kt.emplace_back(row, it.col(), coef * it.value());
          kt.emplace_back(it.col(), row, coef * it.value());
        }
      }
      ++row;
    }
  }

  double scale = 1.0;
  for (const auto& t : kt) scale = std::max(scale, std::abs(t.value()));
  const double delta = 1e-10 * scale;

  SpMat K0(N, N);
  K0.setFromTriplets(kt.begin(), kt.end());
  for (int i = n; i < N; ++i) kt.emplace_back(i, i, -delta);
  SpMat Kreg(N, N);
  Kreg.setFromTriplets(kt.begin(), kt.end());

  Eigen::SparseLU<SpMat> lu(Kreg);
  if (lu.info() != Eigen::Success) throw SingularSystem("KKT factorization failed");

  dvec b = dvec::Zero(N);
  b.head(n) = rhs;
  dvec x = lu.solve(b);
  dvec r = b - K0 * x;
  const double rhs_scale = 1.0 + rhs.lpNorm<Eigen::Infinity>();
  int steps = 0;
  for (; steps < 40; ++steps) {
    double rn = r.lpNorm<Eigen::Infinity>();
    if (rn <= 1e-14 * rhs_scale * std::max(1.0, scale)) break;
    dvec dx = lu.solve(r);
    dvec x_new = x + dx;
    dvec r_new = b - K0 * x_new;
    if (r_new.lpNorm<Eigen::Infinity>() >= 0.9 * rn) break;  // stagnation
    x = x_new;
    r = r_new;
  }
  if (!x.allFinite()) throw SingularSystem("KKT solve produced non-finite values");

  SaddleResult out;
  out.eta = x.head(n);
  out.refinement_steps = steps;
  out.residual = r.lpNorm<Eigen::Infinity>();
  out.theta = dmat::Zero(p.m(), d);
  dmat W_eta = apply_K(p, out.eta);
  for (int j : spec.formula_blocks)
    out.theta.row(j) = (detail::curvature_block(spec.W.row(j)) * W_eta.row(j).transpose()).transpose();
  row = n;
  for (int k = 0; k < n_zero; ++k) {
    out.theta.row(spec.zero_blocks[k]) = x.segment(row, d).transpose();
    row += d;
  }
  out.ray_coeff = dvec::Zero(n_span);
  for (int k = 0; k < n_span; ++k) {
    out.theta.row(spec.span_blocks[k]) =
        (span_bases[k] * x.segment(row, d - 1)).transpose();
    row += d - 1;
    out.ray_coeff[k] = spec.span_dirs.row(k).dot(W_eta.row(spec.span_blocks[k]));
  }
  return out;
}

}  // namespace tvvi
