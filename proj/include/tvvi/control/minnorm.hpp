#pragma once

#include <Eigen/Dense>
#include <vector>

#include "tvvi/core/exceptions.hpp"
#include "tvvi/util/linalg.hpp"

namespace tvvi {

struct MinNormPoint {
  dvec point;            // nearest point of conv{columns of G} to the origin
  double norm = 0.0;
  std::vector<double> coeffs;  // simplex coefficients over all columns
};

// Wolfe's minimum-norm-point algorithm over the convex hull of the columns
// of G. Gram entries are formed on demand; the corral stays affinely
// independent, so the inner solves are tiny dense systems.
inline MinNormPoint min_norm_point(const dmat& G, double tol = 1e-10) {
  const int J = static_cast<int>(G.cols());
  if (J == 0) throw DimensionMismatch("min_norm_point needs at least one column");
  MinNormPoint out;
  out.coeffs.assign(J, 0.0);

  int j0 = 0;
  double best = G.col(0).squaredNorm();
  for (int j = 1; j < J; ++j) {
    double v = G.col(j).squaredNorm();
    if (v < best) {
      best = v;
      j0 = j;
    }
  }
  std::vector<int> S = {j0};
  std::vector<double> lam = {1.0};
  dvec x = G.col(j0);
  const double scale = std::max(1.0, std::sqrt(best));

  for (int outer = 0; outer < 16 * J + 64; ++outer) {
    int t = 0;
    double mn = G.col(0).dot(x);
    for (int j = 1; j < J; ++j) {
      double v = G.col(j).dot(x);
      if (v < mn) {
        mn = v;
        t = j;
      }
    }
    if (mn >= x.squaredNorm() - tol * scale * scale) break;
    if (std::find(S.begin(), S.end(), t) != S.end()) break;  // numerical fixpoint
    S.push_back(t);
    lam.push_back(0.0);

    for (int inner = 0; inner < 16 * J + 64; ++inner) {
      // affine min-norm point over S: KKT [Gram 1; 1^T 0][alpha; nu] = [0; 1]
      const int s = static_cast<int>(S.size());
      dmat A(s + 1, s + 1);
      for (int a = 0; a < s; ++a)
        for (int b = 0; b < s; ++b) A(a, b) = G.col(S[a]).dot(G.col(S[b]));
      A.block(0, s, s, 1).setOnes();
      A.block(s, 0, 1, s).setOnes();
      A(s, s) = 0.0;
      dvec rhs = dvec::Zero(s + 1);
      rhs[s] = 1.0;
      dvec sol = A.fullPivLu().solve(rhs);
      dvec alpha = sol.head(s);

      bool interior = true;
      for (int a = 0; a < s; ++a)
        if (alpha[a] <= 1e-12) interior = false;
      if (interior) {
        lam.assign(alpha.data(), alpha.data() + s);
        break;
      }
      double theta = 1.0;
      for (int a = 0; a < s; ++a)
        if (lam[a] - alpha[a] > 1e-300)
          theta = std::min(theta, lam[a] / (lam[a] - alpha[a]));
      std::vector<int> S_new;
      std::vector<double> lam_new;
      for (int a = 0; a < s; ++a) {
        double v = (1.0 - theta) * lam[a] + theta * alpha[a];
        if (v > 1e-12) {
          S_new.push_back(S[a]);
          lam_new.push_back(v);
        }
      }
      if (S_new.empty()) {  // keep the best single point
        S_new.push_back(S[0]);
        lam_new.push_back(1.0);
      }
      S.swap(S_new);
      lam.swap(lam_new);
    }
    x.setZero();
    for (size_t a = 0; a < S.size(); ++a) x += lam[a] * G.col(S[a]);
  }

  double lsum = 0.0;
  for (double v : lam) lsum += v;
  for (size_t a = 0; a < S.size(); ++a) out.coeffs[S[a]] = lam[a] / lsum;
  out.point = x;
  out.norm = x.norm();
  return out;
}

}  // namespace tvvi
