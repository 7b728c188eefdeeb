// Command-line front end: every library operation as a subcommand with
// file-based inputs and outputs. Exit codes: 0 success, 2 bad input,
// 3 failed computation, 4 enumeration cap exceeded.

#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tvvi/tvvi.hpp"

namespace fs = std::filesystem;
using namespace tvvi;

namespace {

struct GlobalArgs {
  std::string out = ".";
  unsigned seed = 7;
  double tol = 0.0;  // 0: per-command default
  int threads = 0;   // 0: leave the default
};

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

std::string out_path(const GlobalArgs& g, const std::string& name) {
  fs::create_directories(g.out);
  return (fs::path(g.out) / name).string();
}

void finish_manifest(const GlobalArgs& g, RunManifest m, const Timer& timer) {
  m.wall_time_seconds = timer.seconds();
  fs::create_directories(g.out);
  write_manifest(g.out, m);
}

dvec read_direction(const std::string& path, int n) {
  dvec h;
  if (path.size() > 4 && path.substr(path.size() - 4) == ".mtx") {
    h = read_matrix_market_vector(path);
  } else {
    json j = load_json_file(path);
    h = tvvi::detail::vector_from_json(j.is_object() && j.contains("h") ? j["h"] : j);
  }
  if (h.size() != n) throw Error("direction length does not match the problem");
  return h;
}

CostFunction build_cost(const std::string& target_path, double target_value, double alpha,
                        const std::string& u_target_path, int n) {
  dvec target = target_path.empty() ? dvec(dvec::Constant(n, target_value))
                                    : read_matrix_market_vector(target_path);
  if (target.size() != n) throw Error("target length does not match the problem");
  dvec u_target;
  if (!u_target_path.empty()) {
    u_target = read_matrix_market_vector(u_target_path);
    if (u_target.size() != n) throw Error("control target length does not match the problem");
  }
  return tracking_cost(target, alpha, u_target);
}

const char* stop_name(TRStop s) {
  switch (s) {
    case TRStop::GradientZero: return "gradient_zero";
    case TRStop::StepTolerance: return "step_tolerance";
    case TRStop::PsiStationary: return "psi_stationary";
    case TRStop::MaxIterations: return "max_iterations";
    default: return "running";
  }
}

std::vector<int> to_zero_based(const std::vector<int>& one_based, int m, const char* what) {
  std::vector<int> out;
  for (int v : one_based) {
    if (v < 1 || v > m) throw Error(std::string("cell index out of range in ") + what);
    out.push_back(v - 1);
  }
  return out;
}

int run_vi_solve(const GlobalArgs& g, const std::string& problem_path,
                 const std::string& solver, double gamma, int max_iter) {
  Timer timer;
  VIProblem p = load_problem(problem_path);
  VISolution sol;
  if (solver == "pdhg") {
    PDHGConfig cfg;
    if (g.tol > 0) cfg.tol = g.tol;
    if (max_iter > 0) cfg.max_iter = max_iter;
    sol = solve_vi_pdhg(p, cfg);
  } else if (solver == "ssn") {
    SSNConfig cfg;
    cfg.gamma = gamma;
    if (g.tol > 0) cfg.tol = g.tol;
    if (max_iter > 0) cfg.max_iter = max_iter;
    sol = solve_vi_ssn(p, cfg);
  } else {
    throw Error("unknown solver '" + solver + "' (expected ssn or pdhg)");
  }
  json out = solution_to_json(sol);
  out["energy"] = energy(p, sol.y);
  write_json_file(out_path(g, "solution.json"), out);

  RunManifest m;
  m.command = "vi-solve";
  m.config = {{"solver", solver}, {"gamma", gamma}, {"tol", g.tol}, {"seed", g.seed}};
  m.inputs = {problem_path};
  m.outputs = {"solution.json"};
  finish_manifest(g, m, timer);
  return 0;
}

int run_differentiate(const GlobalArgs& g, const std::string& problem_path,
                      const std::string& solution_path, const std::string& direction_path) {
  Timer timer;
  VIProblem p = load_problem(problem_path);
  VISolution sol = solution_from_json(load_json_file(solution_path));
  dvec h = read_direction(direction_path, p.n());

  DirectionalConfig cfg;
  if (g.tol > 0) cfg.verify_tol = g.tol;
  IndexSets sets = classify_sets(p, sol, cfg.eps_active);
  auto der = directional_derivative(p, sol, sets, h, cfg);
  write_json_file(out_path(g, "derivative.json"), derivative_to_json(der));

  RunManifest m;
  m.command = "differentiate";
  m.config = {{"tol", g.tol}, {"seed", g.seed}};
  m.inputs = {problem_path, solution_path, direction_path};
  m.outputs = {"derivative.json"};
  finish_manifest(g, m, timer);
  return 0;
}

int run_subdiff(const GlobalArgs& g, const std::string& problem_path,
                const std::string& solution_path, const std::string& direction_path,
                const std::vector<int>& b0, const std::vector<int>& b1, bool clarke) {
  Timer timer;
  VIProblem p = load_problem(problem_path);
  VISolution sol = solution_from_json(load_json_file(solution_path));
  dvec h = read_direction(direction_path, p.n());
  IndexSets sets = classify_sets(p, sol, 1e-8);

  DerivativeResult der;
  if (clarke) {
    der = clarke_element(p, sol, sets, h);
  } else {
    BiactivePartition part;
    part.b0 = to_zero_based(b0, p.m(), "--b0");
    part.b1 = to_zero_based(b1, p.m(), "--b1");
    der = bouligand_element(p, sol, sets, part, h);
  }
  write_json_file(out_path(g, "derivative.json"), derivative_to_json(der));

  RunManifest m;
  m.command = "subdiff";
  m.config = {{"b0", b0}, {"b1", b1}, {"clarke", clarke}, {"seed", g.seed}};
  m.inputs = {problem_path, solution_path, direction_path};
  m.outputs = {"derivative.json"};
  finish_manifest(g, m, timer);
  return 0;
}

int run_check_stationarity(const GlobalArgs& g, const std::string& problem_path,
                           const std::string& solution_path, const std::string& target_path,
                           double target_value, double alpha, const std::string& u_target_path) {
  Timer timer;
  VIProblem p = load_problem(problem_path);
  VISolution sol = solution_from_json(load_json_file(solution_path));
  CostFunction J = build_cost(target_path, target_value, alpha, u_target_path, p.n());
  IndexSets sets = classify_sets(p, sol, 1e-8);
  double tol = g.tol > 0 ? g.tol : 1e-8;
  auto cert = strong_stationarity_check(p, J, sol, sets, tol);
  write_json_file(out_path(g, "certificate.json"), certificate_to_json(cert));

  RunManifest m;
  m.command = "check-stationarity";
  m.config = {{"alpha", alpha}, {"target_value", target_value}, {"tol", tol}, {"seed", g.seed}};
  m.inputs = {problem_path, solution_path};
  if (!target_path.empty()) m.inputs.push_back(target_path);
  if (!u_target_path.empty()) m.inputs.push_back(u_target_path);
  m.outputs = {"certificate.json"};
  finish_manifest(g, m, timer);
  return 0;
}

int run_optimize(const GlobalArgs& g, const std::string& problem_path,
                 const std::string& target_path, double target_value, double alpha,
                 const std::string& u_target_path, const std::string& solver, double gamma,
                 const std::string& tr_config_path) {
  Timer timer;
  VIProblem p = load_problem(problem_path);
  CostFunction J = build_cost(target_path, target_value, alpha, u_target_path, p.n());

  TRConfig tr;
  if (!tr_config_path.empty()) {
    json j = load_json_file(tr_config_path);
    tr.delta0 = j.value("delta0", tr.delta0);
    tr.delta_min = j.value("delta_min", tr.delta_min);
    tr.eta1 = j.value("eta1", tr.eta1);
    tr.eta2 = j.value("eta2", tr.eta2);
    tr.beta1 = j.value("beta1", tr.beta1);
    tr.beta2 = j.value("beta2", tr.beta2);
    tr.mu = j.value("mu", tr.mu);
    tr.dogleg_beta = j.value("dogleg_beta", tr.dogleg_beta);
    tr.dogleg_delta = j.value("dogleg_delta", tr.dogleg_delta);
    tr.stop_tol = j.value("stop_tol", tr.stop_tol);
    tr.max_iter = j.value("max_iter", tr.max_iter);
    tr.partition_cap = j.value("partition_cap", tr.partition_cap);
    tr.eps_active = j.value("eps_active", tr.eps_active);
    tr.lipschitz = j.value("lipschitz", tr.lipschitz);
  }
  if (g.tol > 0) tr.stop_tol = g.tol;

  SolutionMap lower;
  if (solver == "pdhg")
    lower = make_pdhg_solution_map();
  else if (solver == "ssn") {
    SSNConfig scfg;
    scfg.gamma = gamma;
    lower = make_ssn_solution_map(scfg);
    if (tr.eps_active <= 1e-8) tr.eps_active = 1.0 / gamma;
  } else
    throw Error("unknown solver '" + solver + "' (expected ssn or pdhg)");

  auto res = tr_optimize(p.ops, p.u, J, tr, lower);

  write_trace_csv(out_path(g, "trace.csv"), res.trace);
  json opt;
  opt["u"] = tvvi::detail::vector_to_json(res.u);
  opt["f"] = res.f;
  opt["iterations"] = res.iterations;
  opt["stop"] = stop_name(res.stop);
  opt["grad_norm"] = res.gradient.size() ? res.gradient.norm() : 0.0;
  write_json_file(out_path(g, "optimum.json"), opt);
  write_json_file(out_path(g, "solution.json"), solution_to_json(res.sol));

  RunManifest m;
  m.command = "optimize";
  m.config = {{"alpha", alpha},   {"target_value", target_value}, {"solver", solver},
              {"gamma", gamma},   {"stop_tol", tr.stop_tol},      {"seed", g.seed},
              {"delta0", tr.delta0}};
  m.inputs = {problem_path};
  if (!target_path.empty()) m.inputs.push_back(target_path);
  if (!tr_config_path.empty()) m.inputs.push_back(tr_config_path);
  m.outputs = {"trace.csv", "optimum.json", "solution.json"};
  finish_manifest(g, m, timer);
  return 0;
}

int run_experiment_table1(const GlobalArgs& g, std::vector<double> alphas, int grid_n,
                          const std::string& solver) {
  Timer timer;
  if (alphas.empty()) alphas = {5e-3, 1e-3, 5e-4, 1e-4, 5e-5};
  BinghamConfig base;
  base.grid.subdivisions = grid_n;
  base.lower = solver == "pdhg" ? BinghamConfig::Lower::PDHG : BinghamConfig::Lower::SSN;
  if (solver != "pdhg" && solver != "ssn")
    throw Error("unknown solver '" + solver + "' (expected ssn or pdhg)");
  if (g.tol > 0) base.tr.stop_tol = g.tol;

  auto runs = bingham_alpha_sweep(base, alphas);
  write_summary_csv(out_path(g, "summary.csv"), runs);
  RunManifest m;
  m.command = "experiment table1";
  m.config = {{"alphas", alphas}, {"grid", grid_n}, {"solver", solver}, {"seed", g.seed}};
  m.outputs = {"summary.csv"};
  for (size_t i = 0; i < runs.size(); ++i) {
    const auto& r = runs[i];
    std::string tag = std::to_string(i + 1);
    write_trace_csv(out_path(g, "trace_" + tag + ".csv"), r.result.trace);
    write_field_csv(out_path(g, "control_" + tag + ".csv"), r.grid, r.result.u);
    write_field_csv(out_path(g, "state_" + tag + ".csv"), r.grid, r.result.sol.y);
    write_field_csv(out_path(g, "adjoint_" + tag + ".csv"), r.grid, r.adjoint);
    for (const char* stem : {"trace_", "control_", "state_", "adjoint_"})
      m.outputs.push_back(stem + tag + ".csv");
  }
  finish_manifest(g, m, timer);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Solvers, sensitivity analysis, stationarity checks, and trust-region optimal "
               "control for total-variation variational inequalities"};
  app.require_subcommand(1);

  GlobalArgs g;
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_option("--seed", g.seed, "Random seed recorded in the manifest")->capture_default_str();
  app.add_option("--tol", g.tol, "Override the command's main tolerance");
  app.add_option("--threads", g.threads, "Eigen thread count (0 = default)");

  // vi-solve
  auto* solve_cmd = app.add_subcommand("vi-solve", "Solve the variational inequality");
  std::string problem_path, solver = "ssn";
  double gamma = 1e3;
  int max_iter = 0;
  solve_cmd->add_option("--problem", problem_path, "Problem descriptor JSON")->required();
  solve_cmd->add_option("--solver", solver, "ssn or pdhg")->capture_default_str();
  solve_cmd->add_option("--gamma", gamma, "Smoothing weight for ssn")->capture_default_str();
  solve_cmd->add_option("--max-iter", max_iter, "Iteration cap (0 = solver default)");

  // differentiate
  auto* diff_cmd = app.add_subcommand("differentiate", "Directional derivative of the solution map");
  std::string solution_path, direction_path;
  diff_cmd->add_option("--problem", problem_path, "Problem descriptor JSON")->required();
  diff_cmd->add_option("--solution", solution_path, "solution.json from vi-solve")->required();
  diff_cmd->add_option("--direction", direction_path, "Direction (JSON array or .mtx)")->required();

  // subdiff
  auto* sub_cmd = app.add_subcommand("subdiff", "Subdifferential element for a chosen partition");
  std::vector<int> b0_cells, b1_cells;
  bool clarke = false;
  sub_cmd->add_option("--problem", problem_path, "Problem descriptor JSON")->required();
  sub_cmd->add_option("--solution", solution_path, "solution.json from vi-solve")->required();
  sub_cmd->add_option("--direction", direction_path, "Direction (JSON array or .mtx)")->required();
  sub_cmd->add_option("--b0", b0_cells, "1-based biactive cells pinned to zero");
  sub_cmd->add_option("--b1", b1_cells, "1-based biactive cells released along the ray");
  sub_cmd->add_flag("--clarke", clarke, "Generalized-Jacobian element instead of a partition");

  // check-stationarity
  auto* stat_cmd = app.add_subcommand("check-stationarity", "Strong-stationarity certificate");
  std::string target_path, u_target_path;
  double target_value = 1.0, alpha = 5e-4;
  stat_cmd->add_option("--problem", problem_path, "Problem descriptor JSON")->required();
  stat_cmd->add_option("--solution", solution_path, "solution.json at the control")->required();
  stat_cmd->add_option("--target-path", target_path, "Target state (.mtx vector)");
  stat_cmd->add_option("--target-value", target_value, "Constant target state")
      ->capture_default_str();
  stat_cmd->add_option("--alpha", alpha, "Control penalty weight")->capture_default_str();
  stat_cmd->add_option("--u-target-path", u_target_path, "Control shift (.mtx vector)");

  // optimize
  auto* opt_cmd = app.add_subcommand("optimize", "Trust-region descent on the reduced cost");
  std::string tr_config_path;
  opt_cmd->add_option("--problem", problem_path, "Problem descriptor JSON (u = initial control)")
      ->required();
  opt_cmd->add_option("--target-path", target_path, "Target state (.mtx vector)");
  opt_cmd->add_option("--target-value", target_value, "Constant target state")
      ->capture_default_str();
  opt_cmd->add_option("--alpha", alpha, "Control penalty weight")->capture_default_str();
  opt_cmd->add_option("--u-target-path", u_target_path, "Control shift (.mtx vector)");
  opt_cmd->add_option("--solver", solver, "ssn or pdhg")->capture_default_str();
  opt_cmd->add_option("--gamma", gamma, "Smoothing weight for ssn")->capture_default_str();
  opt_cmd->add_option("--config", tr_config_path, "Trust-region config JSON");

  // experiment table1
  auto* exp_cmd = app.add_subcommand("experiment", "Reproduction experiments");
  auto* table1_cmd = exp_cmd->add_subcommand("table1", "Penalty-weight sweep on the duct flow");
  std::vector<double> alphas;
  int grid_n = 60;
  table1_cmd->add_option("--alphas", alphas, "Penalty weights (default: the published five)");
  table1_cmd->add_option("--grid", grid_n, "Subdivisions per side")->capture_default_str();
  table1_cmd->add_option("--solver", solver, "ssn or pdhg")->capture_default_str();
  exp_cmd->require_subcommand(1);

  // accept the global options after the subcommand as well
  for (CLI::App* sc : {solve_cmd, diff_cmd, sub_cmd, stat_cmd, opt_cmd, exp_cmd, table1_cmd})
    sc->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (g.threads > 0) Eigen::setNbThreads(g.threads);
    if (solve_cmd->parsed()) return run_vi_solve(g, problem_path, solver, gamma, max_iter);
    if (diff_cmd->parsed())
      return run_differentiate(g, problem_path, solution_path, direction_path);
    if (sub_cmd->parsed())
      return run_subdiff(g, problem_path, solution_path, direction_path, b0_cells, b1_cells,
                         clarke);
    if (stat_cmd->parsed())
      return run_check_stationarity(g, problem_path, solution_path, target_path, target_value,
                                    alpha, u_target_path);
    if (opt_cmd->parsed())
      return run_optimize(g, problem_path, target_path, target_value, alpha, u_target_path,
                          solver, gamma, tr_config_path);
    if (exp_cmd->parsed() && table1_cmd->parsed())
      return run_experiment_table1(g, alphas, grid_n, solver);
    std::cerr << "no subcommand selected\n";
    return 2;
  } catch (const PartitionCapExceeded& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const NoConvergence& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const NoValidPartition& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
