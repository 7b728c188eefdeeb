#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <memory>
#include <utility>
#include <vector>

#include "tvvi/core/exceptions.hpp"
#include "tvvi/util/linalg.hpp"

namespace tvvi {

// Fixed operators of a VI instance: A (n x n, SPD) and the block gradient
// map K : R^n -> R^(m x d) given by d stacked m x n matrices. Shared between
// problems that differ only in the control u, so norm estimates and the
// injectivity diagnostic are computed once.
struct Operators {
  SpMat A;
  std::vector<SpMat> Ks;
  SpMat KtK;             // sum_i K_i^T K_i
  double norm_K = 0.0;   // sqrt(lambda_max(KtK))
  double min_eig_KtK = 0.0;
  double norm_A = 0.0;
  double norm_Ainv = 0.0;  // 1 / lambda_min(A), the Lipschitz estimate of S

  int n() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(Ks.empty() ? 0 : Ks[0].rows()); }
  int d() const { return static_cast<int>(Ks.size()); }
};

namespace detail {

inline void check_symmetric(const SpMat& A, double rel_tol = 1e-10) {
  SpMat D = SpMat(A.transpose()) - A;
  double scale = 1.0;
  for (int k = 0; k < A.outerSize(); ++k)
    for (SpMat::InnerIterator it(A, k); it; ++it)
      scale = std::max(scale, std::abs(it.value()));
  for (int k = 0; k < D.outerSize(); ++k)
    for (SpMat::InnerIterator it(D, k); it; ++it)
      if (std::abs(it.value()) > rel_tol * scale)
        throw InvalidProblem("A is not symmetric");
}

inline void spd_probe(const SpMat& A, int probes = 16) {
  std::srand(3);
  for (int t = 0; t < probes; ++t) {
    dvec x = dvec::Random(A.rows());
    if (x.norm() == 0.0) continue;
    if (x.dot(dvec(A * x)) <= 0.0) throw InvalidProblem("A failed the SPD probe");
  }
}

}  // namespace detail

inline std::shared_ptr<const Operators> make_operators(SpMat A, std::vector<SpMat> Ks,
                                                       bool validate = true) {
  auto ops = std::make_shared<Operators>();
  ops->A = std::move(A);
  ops->Ks = std::move(Ks);
  const int n = ops->n();
  if (ops->A.cols() != n) throw DimensionMismatch("A must be square");
  if (ops->Ks.empty()) throw DimensionMismatch("K needs at least one block");
  const int m = ops->m();
  for (const auto& K : ops->Ks)
    if (K.rows() != m || K.cols() != n)
      throw DimensionMismatch("every K block must be m x n");

  ops->KtK = SpMat(n, n);
  for (const auto& K : ops->Ks) ops->KtK += SpMat(K.transpose() * K);

  ops->norm_K = std::sqrt(linalg::power_iteration(
      [&](const dvec& v) { return dvec(ops->KtK * v); }, n));
  ops->norm_A = linalg::power_iteration(
      [&](const dvec& v) { return dvec(ops->A * v); }, n);

  if (validate) {
    detail::check_symmetric(ops->A);
    detail::spd_probe(ops->A);
    ops->min_eig_KtK = linalg::min_eigenvalue_estimate(ops->KtK);
    if (ops->min_eig_KtK <= 1e-10 * std::max(1.0, ops->norm_K * ops->norm_K))
      throw InvalidProblem("K failed the injectivity probe (K^T K near-singular)");
    Eigen::SimplicialLDLT<SpMat> ldlt(ops->A);
    if (ldlt.info() != Eigen::Success) throw InvalidProblem("A is not positive definite");
    // inverse power iteration for lambda_min(A)
    std::srand(5);
    dvec x = dvec::Random(n);
    x.normalize();
    double mu = 0.0;
    for (int k = 0; k < 60; ++k) {
      dvec y = ldlt.solve(x);
      double ny = y.norm();
      if (ny == 0.0) break;
      x = y / ny;
      mu = x.dot(dvec(ops->A * x));
    }
    ops->norm_Ainv = mu > 0.0 ? 1.0 / mu : 0.0;
  }
  return ops;
}

// One VI instance: operators plus the control u. Copies are cheap (operators
// shared); with_control swaps u without revalidating.
struct VIProblem {
  std::shared_ptr<const Operators> ops;
  dvec u;

  VIProblem() = default;
  VIProblem(std::shared_ptr<const Operators> ops_, dvec u_)
      : ops(std::move(ops_)), u(std::move(u_)) {
    if (u.size() != ops->n()) throw DimensionMismatch("u must have length n");
  }
  VIProblem(SpMat A, std::vector<SpMat> Ks, dvec u_, bool validate = true)
      : VIProblem(make_operators(std::move(A), std::move(Ks), validate), std::move(u_)) {}

  int n() const { return ops->n(); }
  int m() const { return ops->m(); }
  int d() const { return ops->d(); }
  const SpMat& A() const { return ops->A; }
  const std::vector<SpMat>& Ks() const { return ops->Ks; }

  VIProblem with_control(dvec u_new) const { return VIProblem(ops, std::move(u_new)); }
};

// (K y) as an m x d array of cell gradients.
inline dmat apply_K(const VIProblem& p, const dvec& y) {
  dmat W(p.m(), p.d());
  for (int i = 0; i < p.d(); ++i) W.col(i) = p.Ks()[i] * y;
  return W;
}

// Adjoint K* applied to an m x d array.
inline dvec apply_Kt(const VIProblem& p, const dmat& Q) {
  dvec out = dvec::Zero(p.n());
  for (int i = 0; i < p.d(); ++i) out += p.Ks()[i].transpose() * Q.col(i);
  return out;
}

// Per-cell Euclidean norms |(K y)_j|.
inline dvec cell_norms(const dmat& W) { return W.rowwise().norm(); }

}  // namespace tvvi
