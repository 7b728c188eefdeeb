#pragma once

// Independent oracles for the test suite: closed forms, grid search, and a
// projected-subgradient evaluation of the bundle stationarity measure. These
// deliberately avoid the library's own algorithms.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "tvvi/core/problem.hpp"
#include "tvvi/core/solution.hpp"
#include "tvvi/util/linalg.hpp"

namespace oracles {

using tvvi::dmat;
using tvvi::dvec;
using tvvi::SpMat;
using tvvi::Triplet;

// Exact minimizer of 1/2 a y^2 - u y + k |y|.
inline double soft_threshold(double a, int k_rows, double u) {
  double mag = std::abs(u) - k_rows;
  return mag > 0 ? (u > 0 ? mag : -mag) / a : 0.0;
}

// Argmin of a univariate function by coarse grid search plus zooming.
inline double grid_search_minimum(const std::function<double(double)>& f, double lo, double hi,
                                  int points = 2001, int refinements = 48) {
  double best_x = lo;
  for (int r = 0; r < refinements; ++r) {
    double best_f = std::numeric_limits<double>::infinity();
    double step = (hi - lo) / (points - 1);
    for (int i = 0; i < points; ++i) {
      double x = lo + i * step;
      double v = f(x);
      if (v < best_f) {
        best_f = v;
        best_x = x;
      }
    }
    lo = best_x - step;
    hi = best_x + step;
    if (step < 1e-14 * std::max(1.0, std::abs(best_x))) break;
  }
  return best_x;
}

// Euclidean projection onto the probability simplex (sort-based).
inline dvec project_simplex(const dvec& v) {
  const int n = static_cast<int>(v.size());
  std::vector<double> u(v.data(), v.data() + n);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double css = 0.0, tau = 0.0;
  for (int i = 0; i < n; ++i) {
    css += u[i];
    double cand = (css - 1.0) / (i + 1);
    if (u[i] - cand > 0.0) tau = cand;
  }
  dvec x(n);
  for (int i = 0; i < n; ++i) x[i] = std::max(v[i] - tau, 0.0);
  return x;
}

// Distance from the origin to conv{columns of G}: accelerated projected
// (sub)gradient descent on 1/2 |G x|^2 over the simplex, certified from below
// through the dual  max_{|y| <= 1} min_j <g_j, y>  at  y = -G x / |G x|.
// Stops when the duality gap closes to tol (or the value itself is below it).
inline double psi_subgradient(const dmat& G, double tol = 1e-8) {
  const int J = static_cast<int>(G.cols());
  dmat GtG = G.transpose() * G;
  double L = Eigen::SelfAdjointEigenSolver<dmat>(GtG).eigenvalues().maxCoeff();
  if (L <= 0.0) return 0.0;

  dvec x = dvec::Constant(J, 1.0 / J);
  dvec z = x;
  double tk = 1.0;
  double fx = 0.5 * x.dot(GtG * x);
  double best_ub = std::sqrt(std::max(0.0, 2.0 * fx));
  dvec best_x = x;
  double best_lb = 0.0;  // the distance is nonnegative
  for (int it = 0; it < 200000; ++it) {
    dvec grad = GtG * z;
    dvec x_new = project_simplex(z - grad / L);
    double f_new = 0.5 * x_new.dot(GtG * x_new);
    if (f_new > fx) {  // restart the momentum on non-monotone progress
      z = x_new;
      tk = 1.0;
    } else {
      double t_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
      z = x_new + ((tk - 1.0) / t_new) * (x_new - x);
      tk = t_new;
    }
    x = x_new;
    fx = f_new;
    double ub = std::sqrt(std::max(0.0, 2.0 * f_new));
    if (ub < best_ub) {
      best_ub = ub;
      best_x = x_new;
    }
    if ((it & 7) == 0) {
      if (best_ub > 0.0) {
        double lb = -(GtG * best_x).maxCoeff() / best_ub;
        best_lb = std::max(best_lb, lb);
      }
      if (best_ub - best_lb <= tol * std::max(1.0, best_ub)) break;
      if (best_ub <= tol) break;
    }
  }
  return best_ub;
}

// Exact distance from the origin to conv{columns of G} by brute force over
// candidate supports: every subset S gets the equality-constrained problem
// min |G_S x|^2 with sum x = 1 solved through its KKT system, and feasible
// candidates (x >= 0) are compared directly. Exponential in the column
// count; exact to solver precision for the small bundles used in tests.
inline double psi_enumerate(const dmat& G) {
  const int J = static_cast<int>(G.cols());
  double best = std::numeric_limits<double>::infinity();
  for (int mask = 1; mask < (1 << J); ++mask) {
    std::vector<int> S;
    for (int j = 0; j < J; ++j)
      if (mask & (1 << j)) S.push_back(j);
    const int k = static_cast<int>(S.size());
    dmat Gs(G.rows(), k);
    for (int i = 0; i < k; ++i) Gs.col(i) = G.col(S[i]);

    dmat kkt = dmat::Zero(k + 1, k + 1);
    kkt.topLeftCorner(k, k) = Gs.transpose() * Gs;
    kkt.topRightCorner(k, 1).setOnes();
    kkt.bottomLeftCorner(1, k).setOnes();
    dvec rhs = dvec::Zero(k + 1);
    rhs[k] = 1.0;
    dvec sol = Eigen::FullPivLU<dmat>(kkt).solve(rhs);
    if ((kkt * sol - rhs).norm() > 1e-10) continue;  // inconsistent face
    dvec x = sol.head(k);
    if ((x.array() < -1e-10).any()) continue;
    best = std::min(best, (Gs * x).norm());
  }
  return best;
}

// Random SPD matrix with a unit-order spectrum.
inline SpMat random_spd(std::mt19937& rng, int n) {
  std::normal_distribution<double> g;
  dmat M(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) M(i, j) = g(rng);
  dmat S = M.transpose() * M / n + dmat::Identity(n, n);
  return S.sparseView();
}

// Random stacked difference-style blocks with an injectivity anchor in the
// first block (requires m >= n).
inline std::vector<SpMat> random_K(std::mt19937& rng, int m, int n, int d) {
  std::normal_distribution<double> g;
  std::vector<SpMat> Ks;
  for (int b = 0; b < d; ++b) {
    dmat K(m, n);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) K(i, j) = 0.7 * g(rng);
    if (b == 0)
      for (int j = 0; j < n && j < m; ++j) K(j, j) += 1.5;
    Ks.push_back(K.sparseView());
  }
  return Ks;
}

inline tvvi::VIProblem random_problem(std::mt19937& rng, int n, int m, int d,
                                      double u_scale = 3.0) {
  std::uniform_real_distribution<double> uu(-u_scale, u_scale);
  dvec u(n);
  for (int i = 0; i < n; ++i) u[i] = uu(rng);
  return tvvi::VIProblem(random_spd(rng, n), random_K(rng, m, n, d), u);
}

// Constructs an instance whose exact solution and index sets are known:
// chooses the active set, puts y in the kernel of the active rows, invents a
// complementary slack, and back-solves for u. Returns false when the random
// draw degenerates (kernel too small or accidental activity).
struct PlantedInstance {
  std::shared_ptr<tvvi::VIProblem> problem;
  dvec y;
  dmat q;
  std::vector<int> inactive, strongly_active, biactive;
};

inline bool plant_instance(std::mt19937& rng, int n, int m, int d, int n_biactive,
                           int n_strong, PlantedInstance& out) {
  std::normal_distribution<double> g;
  auto Ks = random_K(rng, m, n, d);
  SpMat A = random_spd(rng, n);

  std::vector<int> cells(m);
  for (int j = 0; j < m; ++j) cells[j] = j;
  std::shuffle(cells.begin(), cells.end(), rng);
  std::vector<int> biactive(cells.begin(), cells.begin() + n_biactive);
  std::vector<int> strong(cells.begin() + n_biactive, cells.begin() + n_biactive + n_strong);
  std::vector<int> active = biactive;
  active.insert(active.end(), strong.begin(), strong.end());

  // y in the kernel of the active rows
  const int rows = static_cast<int>(active.size()) * d;
  dmat C(rows, n);
  int r = 0;
  for (int j : active)
    for (int b = 0; b < d; ++b) C.row(r++) = dmat(Ks[b]).row(j);
  Eigen::FullPivLU<dmat> lu(C);
  dmat ker = lu.kernel();
  if (ker.cols() == 0 || (rows > 0 && lu.rank() < rows)) return false;
  dvec coeff(ker.cols());
  for (int i = 0; i < coeff.size(); ++i) coeff[i] = g(rng);
  dvec y = ker * coeff;
  if (rows > 0 && y.norm() < 1e-6) return false;
  if (rows == 0) {
    for (int i = 0; i < n; ++i) y[i] = g(rng);
  }

  tvvi::VIProblem probe(A, Ks, dvec::Zero(n));
  dmat W = tvvi::apply_K(probe, y);
  std::vector<char> is_active(m, 0);
  for (int j : active) is_active[j] = 1;
  dmat q(m, d);
  std::uniform_real_distribution<double> mag(0.2, 0.7);
  for (int j = 0; j < m; ++j) {
    if (!is_active[j]) {
      double wn = W.row(j).norm();
      if (wn < 1e-6) return false;  // accidental activity
      q.row(j) = W.row(j) / wn;
    } else {
      dvec dir(d);
      for (int b = 0; b < d; ++b) dir[b] = g(rng);
      if (dir.norm() < 1e-12) return false;
      dir /= dir.norm();
      q.row(j) = dir.transpose();
    }
  }
  for (int j : strong) q.row(j) *= mag(rng);

  dvec u = A * y + tvvi::apply_Kt(probe, q);
  out.problem = std::make_shared<tvvi::VIProblem>(A, Ks, u);
  out.y = y;
  out.q = q;
  out.biactive = biactive;
  out.strongly_active = strong;
  for (int j = 0; j < m; ++j)
    if (!is_active[j]) out.inactive.push_back(j);
  std::sort(out.biactive.begin(), out.biactive.end());
  std::sort(out.strongly_active.begin(), out.strongly_active.end());
  return true;
}

}  // namespace oracles
