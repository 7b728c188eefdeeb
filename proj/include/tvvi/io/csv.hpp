#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "tvvi/bingham/experiment.hpp"
#include "tvvi/control/tr.hpp"
#include "tvvi/io/format.hpp"

namespace tvvi {

inline void write_trace_csv(const std::string& path, const std::vector<TRTraceRow>& trace) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "iter,f,grad_norm,delta,rho,phase,step,psi,step_rel\n";
  for (const auto& r : trace) {
    out << r.iter << "," << format_double(r.f) << "," << format_double(r.grad_norm) << ","
        << format_double(r.delta) << "," << format_double(r.rho) << ","
        << (r.phase == TRPhase::Standard ? "standard" : "modified") << ","
        << (r.accepted ? "success" : "null") << "," << format_double(r.psi) << ","
        << format_double(r.step_rel) << "\n";
  }
  if (!out) throw Error("write failed for " + path);
}

// One row per penalty weight: the Table-1 style summary of a sweep.
inline void write_summary_csv(const std::string& path, const std::vector<BinghamRun>& runs) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "alpha,iterations,final_cost,final_stationarity\n";
  for (const auto& r : runs) {
    const auto& trace = r.result.trace;
    double measure = trace.empty() ? 0.0 : trace.back().grad_norm;
    if (!trace.empty() && !std::isnan(trace.back().psi)) measure = trace.back().psi;
    out << format_double(r.alpha) << "," << r.result.iterations << ","
        << format_double(r.result.f) << "," << format_double(measure) << "\n";
  }
  if (!out) throw Error("write failed for " + path);
}

// Nodal field as a plain value grid: one CSV row per grid line.
inline void write_field_csv(const std::string& path, const GridSpec& g, const dvec& field) {
  if (field.size() != g.node_count()) throw DimensionMismatch("field does not match the grid");
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  const int M = g.nodes_per_side();
  for (int iy = 0; iy < M; ++iy) {
    for (int ix = 0; ix < M; ++ix) {
      if (ix) out << ",";
      out << format_double(field[g.index(ix, iy)]);
    }
    out << "\n";
  }
  if (!out) throw Error("write failed for " + path);
}

}  // namespace tvvi
