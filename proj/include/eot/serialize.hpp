#pragma once

// All bytes in and out of the lab: hand-rolled JSON/CSV emission with a
// fixed 17-significant-digit convention (so identical runs are byte
// identical), schema-checked JSON parsing with line/column diagnostics,
// atomic file writes, and the input-hash provenance stamp embedded in every
// bundle.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "eot/cost.hpp"
#include "eot/invariance.hpp"
#include "eot/measure.hpp"
#include "eot/solver.hpp"
#include "eot/stability.hpp"

namespace eot {

// %.17g with platform-independent nonfinite spelling: "nan", "inf", "-inf".
std::string format_real(double x);

// FNV-1a, the provenance stamp for input files (16 lowercase hex digits).
std::uint64_t fnv1a64(const std::string& bytes);
std::string fnv1a64_hex(const std::string& bytes);

std::string read_file(const std::string& path);
// Temp file in the target directory + rename, so readers never observe a
// half-written report.
void write_file_atomic(const std::string& path, const std::string& content);

// Emitters (deterministic field order; nonfinite reals become null).
std::string to_json(const DiscreteMeasure& m);
std::string to_json(const Coupling& pi);
std::string to_json(const CostSpec& spec);
std::string to_json(const SolveReport& report);
std::string to_json(const InvarianceReport& report);

struct SolveInstance {
  DiscreteMeasure mu, nu;
  CostSpec cost;
  double eps = 1;
};

struct CheckInput {
  SolveInstance instance;
  std::optional<Coupling> coupling;  // absent: solve first, then check
  int k_max = 3;
  long budget = kDefaultCycleBudget;
  std::uint64_t seed = 0;
};

// Parsers. Malformed JSON surfaces as ValidationError with the line/column
// carried in the message; schema violations name the offending key. Unknown
// keys are rejected to catch fixture typos early.
DiscreteMeasure parse_measure(const std::string& text);
Coupling parse_coupling(const std::string& text);
SolveInstance parse_solve_instance(const std::string& text);
CheckInput parse_check_input(const std::string& text);
ExperimentSpec parse_experiment_spec(const std::string& text);

const char* kind_name(ExperimentSpec::Kind kind);

// CSV: header stage_param,w1_to_reference,invariance_residual,
// solver_iterations,alpha_fit,notes; one row per record; reals via
// format_real. counterexample_csv appends the verdict row (stage_param
// column "verdict", limit residual in the invariance column, required ratio
// in the alpha_fit column).
std::string records_to_csv(const std::vector<ExperimentRecord>& records);
std::string counterexample_csv(const CounterexampleResult& result);

// JSON bundles, each stamped with the input hash.
std::string coupling_json(const Coupling& pi, const std::string& input_hash);
std::string solve_bundle_json(const SolveReport& report, const std::string& input_hash);
std::string check_bundle_json(const InvarianceReport& report, const std::string& input_hash);
std::string experiment_bundle_json(const std::vector<ExperimentRecord>& records,
                                   ExperimentSpec::Kind kind, const std::string& input_hash);
std::string counterexample_bundle_json(const CounterexampleResult& result,
                                       const std::string& input_hash);

}  // namespace eot
