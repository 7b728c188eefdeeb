#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "tvvi/core/problem.hpp"
#include "tvvi/util/linalg.hpp"

namespace tvvi {

// Uniform grid on the unit square with homogeneous Dirichlet boundary; only
// interior nodes carry unknowns, ordered x-fastest.
struct GridSpec {
  int subdivisions = 60;

  double h() const { return 1.0 / subdivisions; }
  int nodes_per_side() const { return subdivisions - 1; }
  int node_count() const { return nodes_per_side() * nodes_per_side(); }
  int index(int ix, int iy) const { return iy * nodes_per_side() + ix; }

  void validate() const {
    if (subdivisions < 2)
      throw InvalidProblem("grid needs at least 2 subdivisions per side");
  }
};

// Five-point Laplacian with the boundary values eliminated.
inline SpMat laplacian_5pt(const GridSpec& g) {
  g.validate();
  const int M = g.nodes_per_side();
  const double w = 1.0 / (g.h() * g.h());
  std::vector<Triplet> t;
  t.reserve(static_cast<size_t>(5) * g.node_count());
  for (int iy = 0; iy < M; ++iy)
    for (int ix = 0; ix < M; ++ix) {
      const int i = g.index(ix, iy);
      t.emplace_back(i, i, 4.0 * w);
      if (ix > 0) t.emplace_back(i, g.index(ix - 1, iy), -w);
      if (ix + 1 < M) t.emplace_back(i, g.index(ix + 1, iy), -w);
      if (iy > 0) t.emplace_back(i, g.index(ix, iy - 1), -w);
      if (iy + 1 < M) t.emplace_back(i, g.index(ix, iy + 1), -w);
    }
  SpMat A(g.node_count(), g.node_count());
  A.setFromTriplets(t.begin(), t.end());
  return A;
}

namespace detail {

// One difference row along a single axis. `pos` is the node index along the
// axis, M the count; boundary neighbors are zero. Variants trade the centered
// stencil for one-sided rows near the boundary:
//   0: centered everywhere
//   1: backward at the first layer
//   2: backward at the first layer, forward at the last
//   3: backward at the first two layers, forward at the last two
inline void difference_row(int variant, int pos, int M, double h,
                           const std::function<void(int, double)>& put) {
  const bool backward = (variant >= 1 && pos == 0) || (variant >= 3 && pos <= 1);
  const bool forward = !backward && ((variant >= 2 && pos == M - 1) ||
                                     (variant >= 3 && pos >= M - 2));
  if (backward) {
    put(pos, 1.0 / h);
    if (pos > 0) put(pos - 1, -1.0 / h);
  } else if (forward) {
    put(pos, -1.0 / h);
    if (pos + 1 < M) put(pos + 1, 1.0 / h);
  } else {
    if (pos + 1 < M) put(pos + 1, 0.5 / h);
    if (pos > 0) put(pos - 1, -0.5 / h);
  }
}

}  // namespace detail

// Discrete gradient (one cell per node, two stacked blocks) for the given
// boundary variant.
inline std::vector<SpMat> gradient_stencil(const GridSpec& g, int variant) {
  g.validate();
  const int M = g.nodes_per_side();
  const int n = g.node_count();
  std::vector<Triplet> tx, ty;
  for (int iy = 0; iy < M; ++iy)
    for (int ix = 0; ix < M; ++ix) {
      const int row = g.index(ix, iy);
      detail::difference_row(variant, ix, M, g.h(),
                             [&](int p, double v) { tx.emplace_back(row, g.index(p, iy), v); });
      detail::difference_row(variant, iy, M, g.h(),
                             [&](int p, double v) { ty.emplace_back(row, g.index(ix, p), v); });
    }
  SpMat Kx(n, n), Ky(n, n);
  Kx.setFromTriplets(tx.begin(), tx.end());
  Ky.setFromTriplets(ty.begin(), ty.end());
  return {Kx, Ky};
}

struct GradientChoice {
  std::vector<SpMat> Ks;
  int variant = 0;
  double min_eig = 0.0;  // smallest eigenvalue of K^T K for the chosen variant
};

// Pure centered differences with zero boundary neighbors can annihilate a
// checkerboard mode; walk the variant ladder until the stacked operator
// passes the same injectivity probe the problem validation uses.
inline GradientChoice injective_gradient(const GridSpec& g, double tol_factor = 1e-10) {
  for (int variant = 0; variant <= 3; ++variant) {
    GradientChoice c;
    c.Ks = gradient_stencil(g, variant);
    c.variant = variant;
    SpMat KtK = SpMat(c.Ks[0].transpose()) * c.Ks[0];
    KtK += SpMat(c.Ks[1].transpose()) * c.Ks[1];
    const double top = linalg::power_iteration(
        [&](const dvec& x) { return dvec(KtK * x); }, g.node_count());
    c.min_eig = linalg::min_eigenvalue_estimate(KtK);
    if (c.min_eig > tol_factor * std::max(1.0, top)) return c;
  }
  throw InjectivityRepairFailed("no gradient variant passed the injectivity probe");
}

// Laplacian plus repaired gradient, packaged for the solver stack.
inline std::shared_ptr<const Operators> bingham_operators(const GridSpec& g,
                                                          int* variant_out = nullptr) {
  auto choice = injective_gradient(g);
  if (variant_out) *variant_out = choice.variant;
  return make_operators(laplacian_5pt(g), choice.Ks);
}

}  // namespace tvvi
