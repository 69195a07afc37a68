// eotlab — command-line front end for the entropic transport lab.
//
// Subcommands: solve, check, experiment, counterexample. All outputs are
// written atomically into --output-dir; every JSON bundle embeds the FNV-1a
// hash of the raw input bytes so results can be traced back to the exact
// instance that produced them.
//
// Exit codes: 0 success, 1 bad input (including malformed JSON), 2 solver
// failed to converge under `solve`, 3 counterexample verdict not reproduced.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "eot/cost.hpp"
#include "eot/errors.hpp"
#include "eot/invariance.hpp"
#include "eot/measure.hpp"
#include "eot/serialize.hpp"
#include "eot/solver.hpp"
#include "eot/stability.hpp"

namespace {

struct Options {
  std::string input;
  std::string output_dir = "out";
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
  std::optional<long> max_iter;
};

std::string out_path(const Options& opts, const char* name) {
  std::filesystem::create_directories(opts.output_dir);
  return (std::filesystem::path(opts.output_dir) / name).string();
}

eot::SolveConfig solve_config(const Options& opts) {
  eot::SolveConfig config;
  if (opts.tol) config.tol = *opts.tol;
  if (opts.max_iter) config.max_iter = *opts.max_iter;
  return config;
}

struct Stage {
  eot::CostMatrix cost;
  eot::Coupling P;
  eot::GibbsKernel kernel;
};

Stage stage_of(const eot::SolveInstance& inst) {
  eot::CostMatrix cost = eot::evaluate_cost(inst.cost, inst.mu.atoms(), inst.nu.atoms());
  eot::Coupling P = eot::product_measure(inst.mu, inst.nu);
  eot::GibbsKernel kernel = eot::gibbs_kernel(cost, inst.eps, P);
  return {std::move(cost), std::move(P), std::move(kernel)};
}

int run_solve(const Options& opts) {
  const std::string text = eot::read_file(opts.input);
  const std::string hash = eot::fnv1a64_hex(text);
  const eot::SolveInstance inst = eot::parse_solve_instance(text);
  const Stage stage = stage_of(inst);

  const eot::SolveResult result = eot::sinkhorn(stage.kernel, inst.mu, inst.nu,
                                                solve_config(opts));
  eot::write_file_atomic(out_path(opts, "coupling.json"),
                         eot::coupling_json(result.coupling, hash) + "\n");
  eot::write_file_atomic(out_path(opts, "report.json"),
                         eot::solve_bundle_json(result.report, hash) + "\n");
  std::printf("solve: %ld iterations, marginal error %s, eot objective %s\n",
              result.report.iterations,
              eot::format_real(result.report.marginal_error).c_str(),
              eot::format_real(result.report.objective_eot).c_str());
  if (!result.report.converged) {
    std::fprintf(stderr, "solve: did not reach tol within the iteration budget\n");
    return 2;
  }
  return 0;
}

int run_check(const Options& opts) {
  const std::string text = eot::read_file(opts.input);
  const std::string hash = eot::fnv1a64_hex(text);
  const eot::CheckInput input = eot::parse_check_input(text);
  const Stage stage = stage_of(input.instance);

  eot::Coupling pi = [&] {
    if (input.coupling) return *input.coupling;
    const eot::SolveResult result = eot::sinkhorn(stage.kernel, input.instance.mu,
                                                  input.instance.nu, solve_config(opts));
    if (!result.report.converged)
      std::fprintf(stderr,
                   "check: solver stopped at marginal error %s; "
                   "iterates are invariant regardless\n",
                   eot::format_real(result.report.marginal_error).c_str());
    return result.coupling;
  }();

  const std::uint64_t seed = opts.seed.value_or(input.seed);
  const eot::InvarianceReport report =
      eot::check_invariance(pi, stage.kernel, stage.P, input.k_max, input.budget, seed);
  eot::write_file_atomic(out_path(opts, "invariance.json"),
                         eot::check_bundle_json(report, hash) + "\n");
  std::printf("check: %s over %ld cycles (k <= %d), max residual %s\n",
              report.mode == eot::InvarianceReport::Mode::exhaustive ? "exhaustive"
                                                                     : "sampled",
              report.cycles_checked, report.k_max,
              eot::format_real(report.max_residual).c_str());
  return 0;
}

int run_counterexample_case(const Options& opts, const std::string& hash) {
  const eot::CounterexampleResult result = eot::run_counterexample();
  eot::write_file_atomic(out_path(opts, "counterexample.csv"),
                         eot::counterexample_csv(result));
  eot::write_file_atomic(out_path(opts, "counterexample.json"),
                         eot::counterexample_bundle_json(result, hash) + "\n");
  std::printf("counterexample: %s (limit residual %s, required ratio %s)\n",
              result.verdict.c_str(), eot::format_real(result.limit_residual).c_str(),
              eot::format_real(result.required_ratio).c_str());
  return result.verdict == "instability reproduced" ? 0 : 3;
}

int run_experiment_cmd(const Options& opts) {
  const std::string text = eot::read_file(opts.input);
  const std::string hash = eot::fnv1a64_hex(text);
  eot::ExperimentSpec spec = eot::parse_experiment_spec(text);
  if (opts.seed) spec.seed = *opts.seed;
  if (opts.tol) spec.tol = *opts.tol;
  if (opts.max_iter) spec.max_iter = *opts.max_iter;

  if (spec.kind == eot::ExperimentSpec::Kind::counterexample)
    return run_counterexample_case(opts, hash);

  const std::vector<eot::ExperimentRecord> records = eot::run_experiment(spec);
  eot::write_file_atomic(out_path(opts, "experiment.csv"), eot::records_to_csv(records));
  eot::write_file_atomic(out_path(opts, "experiment.json"),
                         eot::experiment_bundle_json(records, spec.kind, hash) + "\n");
  std::printf("experiment: %s, %zu stage records written\n", eot::kind_name(spec.kind),
              records.size());
  return 0;
}

int run_counterexample_cmd(const Options& opts) {
  std::string hash = eot::fnv1a64_hex("");
  if (!opts.input.empty()) {
    const std::string text = eot::read_file(opts.input);
    hash = eot::fnv1a64_hex(text);
    const eot::ExperimentSpec spec = eot::parse_experiment_spec(text);
    if (spec.kind != eot::ExperimentSpec::Kind::counterexample)
      throw eot::ValidationError("counterexample: input spec has kind " +
                                 std::string(eot::kind_name(spec.kind)));
  }
  return run_counterexample_case(opts, hash);
}

void add_common_flags(CLI::App* cmd, Options& opts, bool input_required) {
  CLI::Option* input = cmd->add_option("--input", opts.input, "input JSON path");
  if (input_required) input->required();
  cmd->add_option("--output-dir", opts.output_dir, "directory for outputs")
      ->capture_default_str();
  cmd->add_option("--seed", opts.seed, "RNG seed override");
  cmd->add_option("--tol", opts.tol, "solver tolerance override");
  cmd->add_option("--max-iter", opts.max_iter, "solver iteration cap override");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"entropic optimal transport solver and verification lab"};
  app.require_subcommand(1);

  Options opts;
  CLI::App* solve = app.add_subcommand("solve", "run the solver on an instance");
  CLI::App* check = app.add_subcommand("check", "verify cyclical invariance");
  CLI::App* experiment = app.add_subcommand("experiment", "run a stability experiment");
  CLI::App* counterexample =
      app.add_subcommand("counterexample", "reproduce the discontinuous-cost instability");
  add_common_flags(solve, opts, true);
  add_common_flags(check, opts, true);
  add_common_flags(experiment, opts, true);
  add_common_flags(counterexample, opts, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (solve->parsed()) return run_solve(opts);
    if (check->parsed()) return run_check(opts);
    if (experiment->parsed()) return run_experiment_cmd(opts);
    return run_counterexample_cmd(opts);
  } catch (const eot::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 1;
  }
}
