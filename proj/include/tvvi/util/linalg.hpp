#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <cmath>
#include <functional>

#include "tvvi/core/exceptions.hpp"

namespace tvvi {

using dvec = Eigen::VectorXd;
using dmat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

namespace linalg {

// Largest eigenvalue of a symmetric PSD operator given as a matvec.
inline double power_iteration(const std::function<dvec(const dvec&)>& op, int n,
                              int iters = 80, unsigned seed = 7) {
  if (n == 0) return 0.0;
  std::srand(seed);
  dvec x = dvec::Random(n);
  if (x.norm() == 0.0) x.setOnes();
  x.normalize();
  double lam = 0.0;
  for (int k = 0; k < iters; ++k) {
    dvec y = op(x);
    lam = x.dot(y);
    double ny = y.norm();
    if (ny == 0.0) return 0.0;
    x = y / ny;
  }
  return std::abs(lam);
}

// Smallest eigenvalue of a symmetric PSD sparse matrix via shifted inverse
// power iteration. Returns ~0 for singular matrices.
inline double min_eigenvalue_estimate(const SpMat& M, int iters = 60) {
  const int n = static_cast<int>(M.rows());
  if (n == 0) return 0.0;
  double lam_max = power_iteration([&](const dvec& v) { return dvec(M * v); }, n);
  double shift = std::max(1e-14 * lam_max, 1e-300);
  SpMat Ms = M;
  for (int i = 0; i < n; ++i) Ms.coeffRef(i, i) += shift;
  Eigen::SimplicialLDLT<SpMat> ldlt(Ms);
  if (ldlt.info() != Eigen::Success) return 0.0;
  std::srand(11);
  dvec x = dvec::Random(n);
  x.normalize();
  double mu = 0.0;
  for (int k = 0; k < iters; ++k) {
    dvec y = ldlt.solve(x);
    if (!y.allFinite()) return 0.0;
    double ny = y.norm();
    if (ny == 0.0) return 0.0;
    x = y / ny;
    mu = x.dot(dvec(M * x));
  }
  return std::max(mu, 0.0);
}

// Conjugate gradient for a consistent (possibly singular) symmetric PSD
// system given as a matvec. Residual-based stop; throws on stagnation if
// the system looks inconsistent beyond tol.
inline dvec cg_consistent(const std::function<dvec(const dvec&)>& op, const dvec& b,
                          double tol, int max_iter, bool* converged = nullptr) {
  const int n = static_cast<int>(b.size());
  dvec x = dvec::Zero(n);
  dvec r = b;
  dvec p = r;
  double rs = r.squaredNorm();
  const double b2 = std::max(b.norm(), 1e-300);
  if (converged) *converged = true;
  if (std::sqrt(rs) <= tol * b2) return x;
  for (int k = 0; k < max_iter; ++k) {
    dvec Ap = op(p);
    double pAp = p.dot(Ap);
    if (pAp <= 0.0) break;  // numerical nullspace direction
    double alpha = rs / pAp;
    x += alpha * p;
    r -= alpha * Ap;
    double rs_new = r.squaredNorm();
    if (std::sqrt(rs_new) <= tol * b2) return x;
    p = r + (rs_new / rs) * p;
    rs = rs_new;
  }
  if (converged)
    *converged = std::sqrt(rs) <= 10 * tol * b2;
  else if (std::sqrt(rs) > 10 * tol * b2)
    throw NoConvergence("cg_consistent stalled", max_iter, std::sqrt(rs));
  return x;
}

}  // namespace linalg
}  // namespace tvvi
