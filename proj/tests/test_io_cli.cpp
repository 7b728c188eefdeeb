#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "support/oracles.hpp"
#include "tvvi/io/csv.hpp"
#include "tvvi/io/format.hpp"
#include "tvvi/io/manifest.hpp"
#include "tvvi/io/matrix_market.hpp"
#include "tvvi/io/problem_io.hpp"
#include "tvvi/solvers/oracle.hpp"

using namespace tvvi;
namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "tvvi_io_cli_tests";

fs::path fresh_dir(const std::string& name) {
  fs::path d = kRoot / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
}

int run_cli(const std::string& args) {
  std::string cmd = std::string(TVVI_CLI_BINARY) + " " + args + " > /dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  REQUIRE(rc != -1);
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -2;
}

}  // namespace

TEST_CASE("format_double round-trips doubles exactly") {
  for (double v : {1.0 / 3.0, 1277.104634583353, -5e-4, 0.0, 1e-300}) {
    REQUIRE(std::stod(format_double(v)) == v);
  }
  REQUIRE(format_double(0.5) == "0.5");
}

TEST_CASE("matrix market coordinate round trip") {
  auto dir = fresh_dir("mm_round");
  std::mt19937 rng(127);
  SpMat A = oracles::random_spd(rng, 5);
  write_matrix_market((dir / "a.mtx").string(), A);
  SpMat B = read_matrix_market((dir / "a.mtx").string());
  REQUIRE(B.rows() == 5);
  REQUIRE((dmat(B) - dmat(A)).norm() == 0.0);
}

TEST_CASE("matrix market symmetric storage is expanded") {
  auto dir = fresh_dir("mm_sym");
  spit(dir / "s.mtx",
       "%%MatrixMarket matrix coordinate real symmetric\n"
       "% lower triangle only\n"
       "3 3 4\n"
       "1 1 2.0\n"
       "2 1 -1.0\n"
       "2 2 2.0\n"
       "3 3 2.0\n");
  SpMat A = read_matrix_market((dir / "s.mtx").string());
  REQUIRE(A.coeff(0, 1) == -1.0);
  REQUIRE(A.coeff(1, 0) == -1.0);
  REQUIRE(A.coeff(2, 2) == 2.0);
}

TEST_CASE("matrix market array storage reads column major") {
  auto dir = fresh_dir("mm_array");
  spit(dir / "d.mtx",
       "%%MatrixMarket matrix array real general\n"
       "2 2\n1\n2\n3\n4\n");
  SpMat A = read_matrix_market((dir / "d.mtx").string());
  REQUIRE(A.coeff(0, 0) == 1.0);
  REQUIRE(A.coeff(1, 0) == 2.0);
  REQUIRE(A.coeff(0, 1) == 3.0);
  REQUIRE(A.coeff(1, 1) == 4.0);
}

TEST_CASE("matrix market rejects malformed input") {
  auto dir = fresh_dir("mm_bad");
  spit(dir / "bad_header.mtx", "%%NotMatrixMarket nope\n1 1 1\n1 1 1.0\n");
  REQUIRE_THROWS_AS(read_matrix_market((dir / "bad_header.mtx").string()), Error);
  spit(dir / "bad_index.mtx",
       "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n");
  REQUIRE_THROWS_AS(read_matrix_market((dir / "bad_index.mtx").string()), Error);
  REQUIRE_THROWS_AS(read_matrix_market((dir / "missing.mtx").string()), Error);
}

TEST_CASE("vector files round trip bit-exactly") {
  auto dir = fresh_dir("mm_vec");
  dvec v(3);
  v << 1.0 / 3.0, -2.75, 1e-12;
  write_matrix_market_vector((dir / "v.mtx").string(), v);
  dvec w = read_matrix_market_vector((dir / "v.mtx").string());
  REQUIRE(w.size() == 3);
  for (int i = 0; i < 3; ++i) REQUIRE(w[i] == v[i]);
}

TEST_CASE("problem descriptor save and load") {
  auto dir = fresh_dir("prob_io");
  std::mt19937 rng(131);
  auto p = oracles::random_problem(rng, 4, 5, 2);
  save_problem(dir.string(), p);
  auto q = load_problem((dir / "problem.json").string());
  REQUIRE(q.n() == 4);
  REQUIRE(q.m() == 5);
  REQUIRE(q.d() == 2);
  REQUIRE((dmat(q.A()) - dmat(p.A())).norm() == 0.0);
  for (int i = 0; i < 2; ++i)
    REQUIRE((dmat(q.Ks()[i]) - dmat(p.Ks()[i])).norm() == 0.0);
  REQUIRE((q.u - p.u).norm() == 0.0);

  SECTION("missing fields are reported") {
    json j = load_json_file((dir / "problem.json").string());
    j.erase("K_paths");
    write_json_file((dir / "broken.json").string(), j);
    REQUIRE_THROWS_AS(load_problem((dir / "broken.json").string()), Error);
  }
  SECTION("dimension lies are reported") {
    json j = load_json_file((dir / "problem.json").string());
    j["n"] = 7;
    write_json_file((dir / "lies.json").string(), j);
    REQUIRE_THROWS_AS(load_problem((dir / "lies.json").string()), DimensionMismatch);
  }
}

TEST_CASE("solution json round trip") {
  auto p = build_scalar_family(1.0, 2, 1.0);
  auto sol = solve_vi_oracle_separable(p);
  sol.iterations = 17;
  json j = solution_to_json(sol);
  auto back = solution_from_json(j);
  REQUIRE((back.y - sol.y).norm() == 0.0);
  REQUIRE((back.q - sol.q).norm() == 0.0);
  REQUIRE(back.iterations == 17);
  REQUIRE(back.converged == sol.converged);
  REQUIRE(back.residuals.state_eq == sol.residuals.state_eq);
}

TEST_CASE("trace csv golden format") {
  auto dir = fresh_dir("csv_trace");
  std::vector<TRTraceRow> rows(2);
  rows[0].iter = 0;
  rows[0].f = 0.5;
  rows[0].grad_norm = 2.0;
  rows[0].delta = 10.0;
  rows[0].rho = 0.875;
  rows[0].accepted = true;
  rows[0].step_rel = 0.5;
  rows[1].iter = 1;
  rows[1].f = 0.25;
  rows[1].grad_norm = 1.0;
  rows[1].delta = 13.0;
  rows[1].rho = 0.0;
  rows[1].phase = TRPhase::Modified;
  rows[1].psi = 0.125;
  write_trace_csv((dir / "trace.csv").string(), rows);
  REQUIRE(slurp(dir / "trace.csv") ==
          "iter,f,grad_norm,delta,rho,phase,step,psi,step_rel\n"
          "0,0.5,2,10,0.875,standard,success,nan,0.5\n"
          "1,0.25,1,13,0,modified,null,0.125,nan\n");
}

TEST_CASE("field csv lays the grid out row by row") {
  auto dir = fresh_dir("csv_field");
  GridSpec g{3};  // 2x2 nodes
  dvec field(4);
  field << 1.0, 2.0, 3.0, 4.0;
  write_field_csv((dir / "f.csv").string(), g, field);
  REQUIRE(slurp(dir / "f.csv") == "1,2\n3,4\n");
  REQUIRE_THROWS_AS(write_field_csv((dir / "g.csv").string(), g, dvec::Zero(5)),
                    DimensionMismatch);
}

TEST_CASE("cli vi-solve writes a certified solution") {
  auto fix = fresh_dir("cli_fix");
  save_problem(fix.string(), build_scalar_family(1.0, 1, 2.0));
  auto out = fresh_dir("cli_solve_out");

  REQUIRE(run_cli("vi-solve --problem " + (fix / "problem.json").string() +
                  " --solver pdhg --out " + out.string()) == 0);
  json sol = load_json_file((out / "solution.json").string());
  REQUIRE(sol["converged"].get<bool>());
  REQUIRE(sol["y"][0].get<double>() == Catch::Approx(1.0).margin(1e-6));
  REQUIRE(sol.contains("energy"));

  json man = load_json_file((out / "manifest.json").string());
  REQUIRE(man["command"] == "vi-solve");
  REQUIRE(man["input_hashes"].size() == 1);
  REQUIRE(man.contains("wall_time_seconds"));

  SECTION("semismooth solver agrees to its smoothing bias") {
    auto out2 = fresh_dir("cli_solve_ssn");
    REQUIRE(run_cli("vi-solve --problem " + (fix / "problem.json").string() +
                    " --solver ssn --out " + out2.string()) == 0);
    json s2 = load_json_file((out2 / "solution.json").string());
    REQUIRE(s2["y"][0].get<double>() == Catch::Approx(1.0).margin(5e-3));
  }
  SECTION("repeat runs are byte-identical") {
    auto out3 = fresh_dir("cli_solve_rep");
    REQUIRE(run_cli("vi-solve --problem " + (fix / "problem.json").string() +
                    " --solver pdhg --out " + out3.string()) == 0);
    REQUIRE(slurp(out3 / "solution.json") == slurp(out / "solution.json"));
  }
}

TEST_CASE("cli failure modes use distinct exit codes") {
  auto fix = fresh_dir("cli_bad");
  SECTION("malformed problem file") {
    spit(fix / "broken.json", "{ this is not json");
    REQUIRE(run_cli("vi-solve --problem " + (fix / "broken.json").string() + " --out " +
                    fix.string()) == 2);
  }
  SECTION("iteration cap exhausted") {
    save_problem(fix.string(), build_scalar_family(1.0, 1, 2.0));
    REQUIRE(run_cli("vi-solve --problem " + (fix / "problem.json").string() +
                    " --solver pdhg --max-iter 2 --tol 1e-14 --out " + fix.string()) == 3);
  }
  SECTION("unknown arguments") {
    REQUIRE(run_cli("vi-solve --no-such-flag") == 2);
  }
  SECTION("help exits cleanly") {
    REQUIRE(run_cli("--help") == 0);
  }
}

TEST_CASE("cli differentiate and subdiff on the kink instance") {
  auto fix = fresh_dir("cli_diff");
  save_problem(fix.string(), build_scalar_family(1.0, 1, 1.0));
  REQUIRE(run_cli("vi-solve --problem " + (fix / "problem.json").string() +
                  " --solver pdhg --tol 1e-11 --out " + fix.string()) == 0);
  spit(fix / "dir.json", "[1.0]");

  SECTION("directional derivative picks the release response") {
    auto out = fresh_dir("cli_diff_out");
    REQUIRE(run_cli("differentiate --problem " + (fix / "problem.json").string() +
                    " --solution " + (fix / "solution.json").string() + " --direction " +
                    (fix / "dir.json").string() + " --out " + out.string()) == 0);
    json der = load_json_file((out / "derivative.json").string());
    REQUIRE(der["kind"] == "directional");
    REQUIRE(der["eta"][0].get<double>() == Catch::Approx(1.0).margin(1e-8));
    REQUIRE(der["partition"]["b1"].size() == 1);
  }
  SECTION("released cell reproduces the direction, pinned cell kills it") {
    auto out = fresh_dir("cli_sub_out");
    REQUIRE(run_cli("subdiff --problem " + (fix / "problem.json").string() + " --solution " +
                    (fix / "solution.json").string() + " --direction " +
                    (fix / "dir.json").string() + " --b1 1 --out " + out.string()) == 0);
    json der = load_json_file((out / "derivative.json").string());
    REQUIRE(der["eta"][0].get<double>() == Catch::Approx(1.0).margin(1e-8));

    REQUIRE(run_cli("subdiff --problem " + (fix / "problem.json").string() + " --solution " +
                    (fix / "solution.json").string() + " --direction " +
                    (fix / "dir.json").string() + " --b0 1 --out " + out.string()) == 0);
    der = load_json_file((out / "derivative.json").string());
    REQUIRE(der["eta"][0].get<double>() == Catch::Approx(0.0).margin(1e-8));
  }
  SECTION("clarke element spans the biactive set") {
    auto out = fresh_dir("cli_clarke_out");
    REQUIRE(run_cli("subdiff --problem " + (fix / "problem.json").string() + " --solution " +
                    (fix / "solution.json").string() + " --direction " +
                    (fix / "dir.json").string() + " --clarke --out " + out.string()) == 0);
    json der = load_json_file((out / "derivative.json").string());
    REQUIRE(der["kind"] == "clarke");
  }
  SECTION("out-of-range cells are rejected") {
    REQUIRE(run_cli("subdiff --problem " + (fix / "problem.json").string() + " --solution " +
                    (fix / "solution.json").string() + " --direction " +
                    (fix / "dir.json").string() + " --b1 2 --out " + fix.string()) == 2);
  }
  SECTION("direction can come from a matrix market vector") {
    write_matrix_market_vector((fix / "dir.mtx").string(), dvec::Constant(1, -1.0));
    auto out = fresh_dir("cli_diff_mtx");
    REQUIRE(run_cli("differentiate --problem " + (fix / "problem.json").string() +
                    " --solution " + (fix / "solution.json").string() + " --direction " +
                    (fix / "dir.mtx").string() + " --out " + out.string()) == 0);
    json der = load_json_file((out / "derivative.json").string());
    REQUIRE(der["eta"][0].get<double>() == Catch::Approx(0.0).margin(1e-8));
  }
}

TEST_CASE("cli stationarity certificate") {
  auto fix = fresh_dir("cli_stat");
  const double ustar = 200.0 / 101.0;
  save_problem(fix.string(), build_scalar_family(1.0, 1, ustar));
  REQUIRE(run_cli("vi-solve --problem " + (fix / "problem.json").string() +
                  " --solver pdhg --tol 1e-11 --out " + fix.string()) == 0);

  auto out = fresh_dir("cli_stat_out");
  REQUIRE(run_cli("check-stationarity --problem " + (fix / "problem.json").string() +
                  " --solution " + (fix / "solution.json").string() +
                  " --target-value 1 --alpha 0.01 --out " + out.string()) == 0);
  json cert = load_json_file((out / "certificate.json").string());
  REQUIRE(cert["holds"].get<bool>());
  REQUIRE(cert["gradient_eq_residual"].get<double>() <= 1e-6);

  SECTION("a non-stationary point fails the certificate") {
    auto fix2 = fresh_dir("cli_stat_bad");
    save_problem(fix2.string(), build_scalar_family(1.0, 1, 10.0));
    REQUIRE(run_cli("vi-solve --problem " + (fix2 / "problem.json").string() +
                    " --solver pdhg --tol 1e-11 --out " + fix2.string()) == 0);
    auto out2 = fresh_dir("cli_stat_bad_out");
    REQUIRE(run_cli("check-stationarity --problem " + (fix2 / "problem.json").string() +
                    " --solution " + (fix2 / "solution.json").string() +
                    " --target-value 1 --alpha 0.01 --out " + out2.string()) == 0);
    json c2 = load_json_file((out2 / "certificate.json").string());
    REQUIRE_FALSE(c2["holds"].get<bool>());
  }
}

TEST_CASE("cli optimize descends the scalar design problem") {
  auto fix = fresh_dir("cli_opt");
  save_problem(fix.string(), build_scalar_family(1.0, 1, 10.0));
  auto out = fresh_dir("cli_opt_out");
  REQUIRE(run_cli("optimize --problem " + (fix / "problem.json").string() +
                  " --target-value 1 --alpha 0.01 --solver pdhg --out " + out.string()) == 0);
  json opt = load_json_file((out / "optimum.json").string());
  std::string stop = opt["stop"].get<std::string>();
  REQUIRE((stop == "step_tolerance" || stop == "gradient_zero"));
  REQUIRE(opt["u"][0].get<double>() == Catch::Approx(200.0 / 101.0).margin(1e-3));

  std::string trace = slurp(out / "trace.csv");
  REQUIRE(trace.rfind("iter,f,grad_norm,delta,rho,phase,step,psi,step_rel\n", 0) == 0);
  json man = load_json_file((out / "manifest.json").string());
  REQUIRE(man["outputs"].size() == 3);

  SECTION("config file overrides the defaults") {
    spit(fix / "tr.json", "{\"max_iter\": 2, \"delta0\": 0.5}");
    auto out2 = fresh_dir("cli_opt_cfg");
    REQUIRE(run_cli("optimize --problem " + (fix / "problem.json").string() +
                    " --target-value 1 --alpha 0.01 --solver pdhg --config " +
                    (fix / "tr.json").string() + " --out " + out2.string()) == 0);
    json o2 = load_json_file((out2 / "optimum.json").string());
    REQUIRE(o2["stop"] == "max_iterations");
    REQUIRE(o2["iterations"].get<int>() == 2);
  }
}

TEST_CASE("cli duct flow sweep emits the full file set") {
  auto out = fresh_dir("cli_table1");
  REQUIRE(run_cli("experiment table1 --grid 5 --alphas 0.005 --out " + out.string()) == 0);

  std::string summary = slurp(out / "summary.csv");
  REQUIRE(summary.rfind("alpha,iterations,final_cost,final_stationarity\n", 0) == 0);
  REQUIRE(std::count(summary.begin(), summary.end(), '\n') == 2);

  for (const char* name : {"trace_1.csv", "control_1.csv", "state_1.csv", "adjoint_1.csv"}) {
    REQUIRE(fs::exists(out / name));
  }
  // 4x4 interior nodes: the field files carry four rows of four entries
  std::string control = slurp(out / "control_1.csv");
  REQUIRE(std::count(control.begin(), control.end(), '\n') == 4);
  REQUIRE(fs::exists(out / "manifest.json"));
}
