#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tvvi/core/problem.hpp"
#include "tvvi/core/solution.hpp"
#include "tvvi/io/matrix_market.hpp"
#include "tvvi/sensitivity/derivative.hpp"
#include "tvvi/stationarity/stationarity.hpp"

namespace tvvi {

using nlohmann::json;

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error("malformed JSON in " + path + ": " + e.what());
  }
  return j;
}

inline void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << j.dump(2) << "\n";
  if (!out) throw Error("write failed for " + path);
}

namespace detail {

inline std::string resolve(const std::string& base_dir, const std::string& rel) {
  std::filesystem::path p(rel);
  if (p.is_absolute()) return rel;
  return (std::filesystem::path(base_dir) / p).string();
}

inline dvec vector_from_json(const json& j) {
  if (!j.is_array()) throw Error("expected a JSON array of numbers");
  dvec v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v[static_cast<int>(i)] = j[i].get<double>();
  return v;
}

inline json vector_to_json(const dvec& v) {
  json j = json::array();
  for (int i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

inline dmat matrix_from_json(const json& j, int cols_hint = -1) {
  if (!j.is_array()) throw Error("expected a JSON array of rows");
  const int rows = static_cast<int>(j.size());
  if (rows == 0) return dmat(0, std::max(cols_hint, 0));
  const int cols = static_cast<int>(j[0].size());
  dmat M(rows, cols);
  for (int r = 0; r < rows; ++r) {
    if (static_cast<int>(j[r].size()) != cols) throw Error("ragged JSON matrix");
    for (int c = 0; c < cols; ++c) M(r, c) = j[r][c].get<double>();
  }
  return M;
}

inline json matrix_to_json(const dmat& M) {
  json j = json::array();
  for (int r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    j.push_back(row);
  }
  return j;
}

}  // namespace detail

// Problem descriptor: {n, m, d, A_path, K_paths[], u (inline array or path)}.
// Relative paths are resolved against the descriptor's directory.
inline VIProblem load_problem(const std::string& path, bool validate = true) {
  json j = load_json_file(path);
  const std::string dir = std::filesystem::path(path).parent_path().string();
  for (const char* key : {"n", "m", "d", "A_path", "K_paths", "u"})
    if (!j.contains(key)) throw Error("problem descriptor missing field '" + std::string(key) + "'");

  const int n = j["n"].get<int>();
  const int m = j["m"].get<int>();
  const int d = j["d"].get<int>();
  SpMat A = read_matrix_market(detail::resolve(dir, j["A_path"].get<std::string>()));
  if (A.rows() != n || A.cols() != n) throw DimensionMismatch("A does not match declared n");

  if (static_cast<int>(j["K_paths"].size()) != d)
    throw DimensionMismatch("K_paths count does not match declared d");
  std::vector<SpMat> Ks;
  for (const auto& kp : j["K_paths"]) {
    SpMat K = read_matrix_market(detail::resolve(dir, kp.get<std::string>()));
    if (K.rows() != m || K.cols() != n) throw DimensionMismatch("K block does not match (m, n)");
    Ks.push_back(std::move(K));
  }

  dvec u;
  if (j["u"].is_string())
    u = read_matrix_market_vector(detail::resolve(dir, j["u"].get<std::string>()));
  else
    u = detail::vector_from_json(j["u"]);
  if (u.size() != n) throw DimensionMismatch("u does not match declared n");

  return VIProblem(A, Ks, u, validate);
}

inline void save_problem(const std::string& dir, const VIProblem& p,
                         const std::string& stem = "problem") {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  json j;
  j["n"] = p.n();
  j["m"] = p.m();
  j["d"] = p.d();
  j["A_path"] = stem + "_A.mtx";
  write_matrix_market((fs::path(dir) / (stem + "_A.mtx")).string(), p.A());
  json kp = json::array();
  for (int i = 0; i < p.d(); ++i) {
    std::string name = stem + "_K" + std::to_string(i + 1) + ".mtx";
    write_matrix_market((fs::path(dir) / name).string(), p.Ks()[i]);
    kp.push_back(name);
  }
  j["K_paths"] = kp;
  j["u"] = detail::vector_to_json(p.u);
  write_json_file((fs::path(dir) / (stem + ".json")).string(), j);
}

inline json solution_to_json(const VISolution& s) {
  json j;
  j["y"] = detail::vector_to_json(s.y);
  j["q"] = detail::matrix_to_json(s.q);
  j["iterations"] = s.iterations;
  j["converged"] = s.converged;
  j["residuals"] = {{"state_eq", s.residuals.state_eq},
                    {"complementarity", s.residuals.comp},
                    {"feasibility", s.residuals.feas}};
  return j;
}

inline VISolution solution_from_json(const json& j) {
  VISolution s;
  s.y = detail::vector_from_json(j.at("y"));
  s.q = detail::matrix_from_json(j.at("q"));
  s.iterations = j.value("iterations", 0);
  s.converged = j.value("converged", true);
  if (j.contains("residuals")) {
    s.residuals.state_eq = j["residuals"].value("state_eq", 0.0);
    s.residuals.comp = j["residuals"].value("complementarity", 0.0);
    s.residuals.feas = j["residuals"].value("feasibility", 0.0);
  }
  return s;
}

inline const char* derivative_kind_name(DerivativeKind k) {
  switch (k) {
    case DerivativeKind::Frechet: return "frechet";
    case DerivativeKind::Directional: return "directional";
    case DerivativeKind::Bouligand: return "bouligand";
    case DerivativeKind::Clarke: return "clarke";
  }
  return "unknown";
}

inline json derivative_to_json(const DerivativeResult& r) {
  json j;
  j["kind"] = derivative_kind_name(r.kind);
  j["eta"] = detail::vector_to_json(r.eta);
  j["multiplier"] = detail::matrix_to_json(r.multiplier);
  j["partition"] = {{"b0", r.partition.b0}, {"b1", r.partition.b1}};
  j["system_residual"] = r.system_residual;
  if (r.verification.checked) {
    j["verification"] = {{"cone_violation", r.verification.cone_violation},
                         {"lineality_violation", r.verification.lineality_violation},
                         {"ray_violation", r.verification.ray_violation},
                         {"complementarity", r.verification.complementarity},
                         {"skipped_rays", r.verification.skipped_rays}};
  }
  return j;
}

inline json certificate_to_json(const StrongStationarityCertificate& c) {
  json j;
  j["holds"] = c.holds;
  j["p"] = detail::vector_to_json(c.p_state);
  j["mu"] = detail::vector_to_json(c.mu);
  j["adjoint_eq_residual"] = c.adjoint_eq_residual;
  j["p_cone_violation"] = c.p_cone_violation;
  j["mu_polar_violation"] = c.mu_polar_violation;
  j["gradient_eq_residual"] = c.gradient_eq_residual;
  j["skipped_rays"] = c.skipped_rays;
  return j;
}

}  // namespace tvvi
