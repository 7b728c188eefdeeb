#pragma once

#include "tvvi/sensitivity/derivative.hpp"

namespace tvvi {

struct AdjointResult {
  dvec p;       // adjoint state
  dmat lambda;  // m x d multiplier
  double system_residual = 0.0;
};

// Generalized adjoint for a chosen biactive partition: same block structure
// as the subdifferential systems with the cost gradient as right-hand side.
inline AdjointResult adjoint_solve(const VIProblem& prob, const VISolution& sol,
                                   const IndexSets& sets, const BiactivePartition& part,
                                   const dvec& grad_y) {
  BlockSystemSpec spec;
  spec.formula_blocks = sets.inactive;
  spec.zero_blocks = sets.strongly_active;
  spec.zero_blocks.insert(spec.zero_blocks.end(), part.b0.begin(), part.b0.end());
  std::sort(spec.zero_blocks.begin(), spec.zero_blocks.end());
  spec.span_blocks = part.b1;
  spec.span_dirs = detail::unit_rows(sol.q, part.b1);
  spec.W = apply_K(prob, sol.y);
  auto s = solve_block_kkt(prob, spec, grad_y);
  AdjointResult out;
  out.p = std::move(s.eta);
  out.lambda = std::move(s.theta);
  out.system_residual = s.residual;
  return out;
}

}  // namespace tvvi
