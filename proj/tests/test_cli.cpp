#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "doctest.h"
#include "eot/serialize.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

fs::path scratch() {
  const fs::path dir = fs::temp_directory_path() / "eotlab_cli_tests";
  fs::create_directories(dir);
  return dir;
}

std::string fixture_path(const char* name) {
  return std::string(EOTLAB_FIXTURES) + "/" + name;
}

struct RunResult {
  int code = -1;
  std::string out, err;
};

RunResult run_cli(const std::string& args) {
  static int counter = 0;
  const fs::path dir = scratch();
  const std::string out = (dir / ("stdout." + std::to_string(counter))).string();
  const std::string err = (dir / ("stderr." + std::to_string(counter))).string();
  ++counter;
  const std::string cmd =
      std::string(EOTLAB_BIN) + " " + args + " > " + out + " 2> " + err;
  const int status = std::system(cmd.c_str());
  RunResult r;
  if (WIFEXITED(status)) r.code = WEXITSTATUS(status);
  r.out = eot::read_file(out);
  r.err = eot::read_file(err);
  return r;
}

std::string write_input(const char* name, const std::string& content) {
  const std::string path = (scratch() / name).string();
  eot::write_file_atomic(path, content);
  return path;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("solve writes a coupling and a traceable report") {
  const std::string dir = (scratch() / "solve_ok").string();
  const RunResult r =
      run_cli("solve --input " + fixture_path("abs_2x2.json") + " --output-dir " + dir);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("solve:") != std::string::npos);

  const eot::Coupling pi = eot::parse_coupling(eot::read_file(dir + "/coupling.json"));
  CHECK(std::abs(pi.at(0, 0) - 0.36552928931500245) <= 1e-9);

  const nlohmann::json report =
      nlohmann::json::parse(eot::read_file(dir + "/report.json"));
  CHECK(report.at("input_hash") ==
        eot::fnv1a64_hex(eot::read_file(fixture_path("abs_2x2.json"))));
  CHECK(report.at("report").at("converged") == true);
}

TEST_CASE("solve signals non-convergence with exit 2 but still reports") {
  const std::string dir = (scratch() / "solve_hard").string();
  const RunResult r = run_cli("solve --input " + fixture_path("quadrant_2x2.json") +
                              " --output-dir " + dir + " --max-iter 1 --tol 1e-14");
  CHECK(r.code == 2);
  const nlohmann::json report =
      nlohmann::json::parse(eot::read_file(dir + "/report.json"));
  CHECK(report.at("report").at("converged") == false);
  CHECK(fs::exists(dir + "/coupling.json"));
}

TEST_CASE("malformed input exits 1 with a located diagnostic") {
  const std::string dir = (scratch() / "solve_bad").string();
  const RunResult r =
      run_cli("solve --input " + fixture_path("malformed.json") + " --output-dir " + dir);
  CHECK(r.code == 1);
  CHECK(r.err.find("line") != std::string::npos);

  const RunResult missing =
      run_cli("solve --input /nonexistent/nope.json --output-dir " + dir);
  CHECK(missing.code == 1);
}

TEST_CASE("check solves then verifies invariance") {
  const std::string dir = (scratch() / "check_ok").string();
  const RunResult r =
      run_cli("check --input " + fixture_path("check_small.json") + " --output-dir " + dir);
  REQUIRE(r.code == 0);
  const nlohmann::json bundle =
      nlohmann::json::parse(eot::read_file(dir + "/invariance.json"));
  CHECK(bundle.at("invariance").at("mode") == "exhaustive");
  CHECK(bundle.at("invariance").at("k_max") == 3);
  CHECK(bundle.at("invariance").at("max_residual").get<double>() <= 1e-9);
}

TEST_CASE("check accepts a user-provided coupling") {
  // zero cost makes the independent coupling optimal, hence invariant
  const std::string input = write_input("check_with_coupling.json", R"({
    "mu": {"atoms": [[0], [1]], "weights": [0.5, 0.5]},
    "nu": {"atoms": [[0], [1]], "weights": [0.5, 0.5]},
    "cost": {"kind": "zero"},
    "eps": 1.0,
    "k_max": 2,
    "coupling": {"row_atoms": [[0], [1]], "col_atoms": [[0], [1]],
                 "mass": [[0.25, 0.25], [0.25, 0.25]]}
  })");
  const std::string dir = (scratch() / "check_coupling").string();
  const RunResult r = run_cli("check --input " + input + " --output-dir " + dir);
  REQUIRE(r.code == 0);
  const nlohmann::json bundle =
      nlohmann::json::parse(eot::read_file(dir + "/invariance.json"));
  CHECK(bundle.at("invariance").at("max_residual").get<double>() <= 1e-12);
}

TEST_CASE("experiment emits csv and json with matching bytes across reruns") {
  const std::string dir1 = (scratch() / "exp1").string();
  const std::string dir2 = (scratch() / "exp2").string();
  const std::string input = fixture_path("refine_small.json");
  REQUIRE(run_cli("experiment --input " + input + " --output-dir " + dir1).code == 0);
  REQUIRE(run_cli("experiment --input " + input + " --output-dir " + dir2).code == 0);

  const std::string csv = eot::read_file(dir1 + "/experiment.csv");
  CHECK(csv.rfind("stage_param,w1_to_reference,invariance_residual,solver_iterations,"
                  "alpha_fit,notes\n",
                  0) == 0);
  CHECK(csv == eot::read_file(dir2 + "/experiment.csv"));
  CHECK(eot::read_file(dir1 + "/experiment.json") ==
        eot::read_file(dir2 + "/experiment.json"));

  const nlohmann::json bundle = nlohmann::json::parse(eot::read_file(dir1 + "/experiment.json"));
  CHECK(bundle.at("kind") == "refine_marginals");
  CHECK(bundle.at("records").size() == 2);
}

TEST_CASE("counterexample runs standalone and through the experiment route") {
  const std::string dir = (scratch() / "ce").string();
  const RunResult r = run_cli("counterexample --output-dir " + dir);
  REQUIRE(r.code == 0);
  const std::string csv = eot::read_file(dir + "/counterexample.csv");
  CHECK(csv.find("instability reproduced") != std::string::npos);
  const nlohmann::json bundle =
      nlohmann::json::parse(eot::read_file(dir + "/counterexample.json"));
  CHECK(bundle.at("verdict") == "instability reproduced");
  CHECK(bundle.at("input_hash") == eot::fnv1a64_hex(""));

  const std::string input = write_input("ce_spec.json", R"({"kind":"counterexample"})");
  const std::string dir2 = (scratch() / "ce_routed").string();
  const RunResult routed =
      run_cli("experiment --input " + input + " --output-dir " + dir2);
  CHECK(routed.code == 0);
  CHECK(fs::exists(dir2 + "/counterexample.csv"));
}

TEST_CASE("usage errors exit 1") {
  CHECK(run_cli("").code == 1);
  CHECK(run_cli("frobnicate --input x.json").code == 1);
  CHECK(run_cli("solve --no-such-flag 1").code == 1);
  CHECK(run_cli("experiment").code == 1);  // --input is required here
}

}  // TEST_SUITE
