#include "eot/serialize.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "eot/errors.hpp"
#include "json.hpp"

namespace eot {

namespace {

using nlohmann::json;

std::string json_real(double x) {
  if (!std::isfinite(x)) return "null";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string json_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size() + 2);
  for (const char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
  return out;
}

void append_points(std::string& out, const std::vector<Point>& pts) {
  out += '[';
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i) out += ',';
    out += '[';
    for (std::size_t k = 0; k < pts[i].dim(); ++k) {
      if (k) out += ',';
      out += json_real(pts[i][k]);
    }
    out += ']';
  }
  out += ']';
}

void append_reals(std::string& out, const std::vector<double>& v) {
  out += '[';
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += json_real(v[i]);
  }
  out += ']';
}

std::string coupling_body(const Coupling& pi) {
  std::string out = "\"row_atoms\":";
  append_points(out, pi.row_support());
  out += ",\"col_atoms\":";
  append_points(out, pi.col_support());
  out += ",\"mass\":[";
  for (std::size_t i = 0; i < pi.rows(); ++i) {
    if (i) out += ',';
    out += '[';
    for (std::size_t j = 0; j < pi.cols(); ++j) {
      if (j) out += ',';
      out += json_real(pi.at(i, j));
    }
    out += ']';
  }
  out += ']';
  return out;
}

std::string record_json(const ExperimentRecord& r) {
  std::string out = "{\"stage_param\":" + json_real(r.stage_param);
  out += ",\"w1_to_reference\":" + json_real(r.w1_to_reference);
  out += ",\"invariance_residual\":" + json_real(r.invariance_residual);
  out += ",\"solver_iterations\":" + std::to_string(r.solver_iterations);
  out += ",\"alpha_fit\":" + json_real(r.alpha_fit);
  out += ",\"notes\":\"" + json_escape(r.notes) + "\"}";
  return out;
}

std::string records_json(const std::vector<ExperimentRecord>& records) {
  std::string out = "[";
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (i) out += ',';
    out += record_json(records[i]);
  }
  out += ']';
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (const char c : s) {
    out += c;
    if (c == '"') out += '"';
  }
  out += '"';
  return out;
}

// ---- parsing ---------------------------------------------------------

json parse_text(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // the library message carries "at line L, column C"
    throw ValidationError(std::string("malformed JSON: ") + e.what());
  }
}

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                const char* where) {
  if (!obj.is_object())
    throw ValidationError(std::string(where) + " must be a JSON object");
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const std::string_view k : allowed) known = known || item.key() == k;
    if (!known)
      throw ValidationError(std::string(where) + ": unknown key \"" + item.key() + "\"");
  }
}

const json& require_key(const json& obj, const char* key, const char* where) {
  const auto it = obj.find(key);
  if (it == obj.end())
    throw ValidationError(std::string(where) + ": missing key \"" + key + "\"");
  return *it;
}

double real_of(const json& v, const char* where) {
  if (!v.is_number())
    throw ValidationError(std::string(where) + " must be a number");
  return v.get<double>();
}

long int_of(const json& v, const char* where) {
  if (!v.is_number_integer())
    throw ValidationError(std::string(where) + " must be an integer");
  return v.get<long>();
}

std::uint64_t seed_of(const json& v, const char* where) {
  if (!v.is_number_unsigned())
    throw ValidationError(std::string(where) + " must be a nonnegative integer");
  return v.get<std::uint64_t>();
}

Point point_of(const json& v, const char* where) {
  if (v.is_number()) return Point{v.get<double>()};
  if (!v.is_array() || v.empty())
    throw ValidationError(std::string(where) + ": atoms must be numbers or coordinate arrays");
  std::vector<double> coords;
  for (const json& c : v) coords.push_back(real_of(c, where));
  return Point(std::move(coords));
}

std::vector<Point> points_of(const json& v, const char* where) {
  if (!v.is_array())
    throw ValidationError(std::string(where) + " must be an array");
  std::vector<Point> pts;
  for (const json& p : v) pts.push_back(point_of(p, where));
  return pts;
}

std::vector<double> reals_of(const json& v, const char* where) {
  if (!v.is_array())
    throw ValidationError(std::string(where) + " must be an array of numbers");
  std::vector<double> out;
  for (const json& x : v) out.push_back(real_of(x, where));
  return out;
}

DiscreteMeasure measure_of(const json& obj, const char* where) {
  check_keys(obj, {"atoms", "weights"}, where);
  return DiscreteMeasure(points_of(require_key(obj, "atoms", where), where),
                         reals_of(require_key(obj, "weights", where), where));
}

Coupling coupling_of(const json& obj, const char* where) {
  check_keys(obj, {"row_atoms", "col_atoms", "mass", "input_hash"}, where);
  std::vector<Point> rows = points_of(require_key(obj, "row_atoms", where), where);
  std::vector<Point> cols = points_of(require_key(obj, "col_atoms", where), where);
  const json& m = require_key(obj, "mass", where);
  if (!m.is_array() || m.size() != rows.size())
    throw ValidationError(std::string(where) + ": mass must have one row per row atom");
  std::vector<double> mass;
  mass.reserve(rows.size() * cols.size());
  for (const json& row : m) {
    if (!row.is_array() || row.size() != cols.size())
      throw ValidationError(std::string(where) + ": mass rows must match the column atoms");
    for (const json& x : row) mass.push_back(real_of(x, where));
  }
  return Coupling(std::move(rows), std::move(cols), std::move(mass));
}

CostSpec cost_of(const json& obj, const char* where) {
  check_keys(obj, {"kind", "params", "values"}, where);
  const json& kind = require_key(obj, "kind", where);
  if (!kind.is_string())
    throw ValidationError(std::string(where) + ": kind must be a string");
  const std::string k = kind.get<std::string>();

  if (k == "custom_matrix") {
    const json& values = require_key(obj, "values", where);
    if (!values.is_array() || values.empty())
      throw ValidationError(std::string(where) + ": values must be a nonempty array");
    std::vector<std::vector<double>> v;
    for (const json& row : values) v.push_back(reals_of(row, where));
    return CostSpec::custom(std::move(v));
  }
  if (obj.contains("values"))
    throw ValidationError(std::string(where) + ": values is only for custom_matrix");

  if (k == "quadrant_indicator") {
    const json& params = require_key(obj, "params", where);
    check_keys(params, {"ax", "ay"}, where);
    return CostSpec::quadrant(real_of(require_key(params, "ax", where), where),
                              real_of(require_key(params, "ay", where), where));
  }
  if (obj.contains("params")) check_keys(obj.at("params"), {}, where);
  if (k == "zero") return CostSpec::zero();
  if (k == "squared_euclidean") return CostSpec::squared_euclidean();
  if (k == "absolute") return CostSpec::absolute();
  throw ValidationError(std::string(where) + ": unknown cost kind \"" + k + "\"");
}

Law law_of(const json& obj, const char* where) {
  check_keys(obj, {"kind", "params"}, where);
  const json& kind = require_key(obj, "kind", where);
  if (!kind.is_string())
    throw ValidationError(std::string(where) + ": kind must be a string");
  const std::string k = kind.get<std::string>();
  const json params = obj.contains("params") ? obj.at("params") : json::object();

  auto param = [&](const char* name, double fallback) {
    return params.contains(name) ? real_of(params.at(name), where) : fallback;
  };
  if (k == "uniform") {
    check_keys(params, {"a", "b"}, where);
    return Law::uniform(param("a", 0.0), param("b", 1.0));
  }
  if (k == "gaussian") {
    check_keys(params, {"mean", "stddev"}, where);
    return Law::gaussian(param("mean", 0.0), param("stddev", 1.0));
  }
  if (k == "cauchy") {
    check_keys(params, {"loc", "scale"}, where);
    return Law::cauchy(param("loc", 0.0), param("scale", 1.0));
  }
  throw ValidationError(std::string(where) + ": unknown law kind \"" + k + "\"");
}

SolveInstance instance_of(const json& j, bool extras_allowed) {
  if (extras_allowed)
    check_keys(j, {"mu", "nu", "cost", "eps", "coupling", "k_max", "budget", "seed"},
               "input");
  else
    check_keys(j, {"mu", "nu", "cost", "eps"}, "instance");
  SolveInstance inst{measure_of(require_key(j, "mu", "instance"), "mu"),
                     measure_of(require_key(j, "nu", "instance"), "nu"),
                     cost_of(require_key(j, "cost", "instance"), "cost"),
                     real_of(require_key(j, "eps", "instance"), "eps")};
  if (!(inst.eps > 0)) throw ValidationError("instance: eps must be > 0");
  return inst;
}

}  // namespace

std::string format_real(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (const char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

std::string fnv1a64_hex(const std::string& bytes) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read file: " + path);
  std::string out((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw ValidationError("cannot read file: " + path);
  return out;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write file: " + tmp);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw Error("cannot write file: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error("cannot move " + tmp + " into place: " + ec.message());
}

std::string to_json(const DiscreteMeasure& m) {
  std::string out = "{\"atoms\":";
  append_points(out, m.atoms());
  out += ",\"weights\":";
  append_reals(out, m.weights());
  out += '}';
  return out;
}

std::string to_json(const Coupling& pi) { return "{" + coupling_body(pi) + "}"; }

std::string to_json(const CostSpec& spec) {
  switch (spec.kind) {
    case CostSpec::Kind::zero:
      return R"({"kind":"zero","params":{}})";
    case CostSpec::Kind::squared_euclidean:
      return R"({"kind":"squared_euclidean","params":{}})";
    case CostSpec::Kind::absolute:
      return R"({"kind":"absolute","params":{}})";
    case CostSpec::Kind::quadrant_indicator:
      return std::string(R"({"kind":"quadrant_indicator","params":{"ax":)") +
             json_real(spec.ax) + ",\"ay\":" + json_real(spec.ay) + "}}";
    case CostSpec::Kind::custom_matrix: {
      std::string out = R"({"kind":"custom_matrix","values":[)";
      for (std::size_t i = 0; i < spec.values.size(); ++i) {
        if (i) out += ',';
        append_reals(out, spec.values[i]);
      }
      out += "]}";
      return out;
    }
  }
  throw Error("to_json: unknown cost kind");
}

std::string to_json(const SolveReport& report) {
  std::string out = "{\"iterations\":" + std::to_string(report.iterations);
  out += ",\"marginal_error\":" + json_real(report.marginal_error);
  out += ",\"marginal_error_row\":" + json_real(report.marginal_error_row);
  out += std::string(",\"converged\":") + (report.converged ? "true" : "false");
  out += ",\"objective_eot\":" + json_real(report.objective_eot);
  out += ",\"objective_kl\":" + json_real(report.objective_kl);
  out += ",\"iterate_invariance_residuals\":";
  append_reals(out, report.iterate_invariance_residuals);
  out += ",\"iterate_marginal_errors\":";
  append_reals(out, report.iterate_marginal_errors);
  out += '}';
  return out;
}

std::string to_json(const InvarianceReport& report) {
  std::string out = "{\"k_max\":" + std::to_string(report.k_max);
  out += ",\"cycles_checked\":" + std::to_string(report.cycles_checked);
  out += ",\"max_residual\":" + json_real(report.max_residual);
  out += std::string(",\"mode\":\"") +
         (report.mode == InvarianceReport::Mode::exhaustive ? "exhaustive" : "sampled") +
         "\"";
  out += ",\"worst_cycle\":[";
  for (std::size_t t = 0; t < report.worst_cycle.pairs.size(); ++t) {
    if (t) out += ',';
    out += '[' + std::to_string(report.worst_cycle.pairs[t].first) + ',' +
           std::to_string(report.worst_cycle.pairs[t].second) + ']';
  }
  out += "]}";
  return out;
}

DiscreteMeasure parse_measure(const std::string& text) {
  return measure_of(parse_text(text), "measure");
}

Coupling parse_coupling(const std::string& text) {
  return coupling_of(parse_text(text), "coupling");
}

SolveInstance parse_solve_instance(const std::string& text) {
  return instance_of(parse_text(text), false);
}

CheckInput parse_check_input(const std::string& text) {
  const json j = parse_text(text);
  CheckInput out{instance_of(j, true), std::nullopt, 3, kDefaultCycleBudget, 0};
  if (j.contains("coupling")) out.coupling = coupling_of(j.at("coupling"), "coupling");
  if (j.contains("k_max")) {
    out.k_max = static_cast<int>(int_of(j.at("k_max"), "k_max"));
    if (out.k_max < 2) throw ValidationError("k_max must be >= 2");
  }
  if (j.contains("budget")) {
    out.budget = int_of(j.at("budget"), "budget");
    if (out.budget < 1) throw ValidationError("budget must be >= 1");
  }
  if (j.contains("seed")) out.seed = seed_of(j.at("seed"), "seed");
  return out;
}

ExperimentSpec parse_experiment_spec(const std::string& text) {
  const json j = parse_text(text);
  check_keys(j,
             {"kind", "law_x", "law_y", "cost", "eps", "schedule", "window", "seed",
              "perturbation", "tol", "max_iter"},
             "experiment");
  const json& kind = require_key(j, "kind", "experiment");
  if (!kind.is_string()) throw ValidationError("experiment: kind must be a string");
  const std::string k = kind.get<std::string>();

  ExperimentSpec spec;
  if (k == "refine_marginals") spec.kind = ExperimentSpec::Kind::refine_marginals;
  else if (k == "perturb_cost") spec.kind = ExperimentSpec::Kind::perturb_cost;
  else if (k == "perturb_eps") spec.kind = ExperimentSpec::Kind::perturb_eps;
  else if (k == "infinite_cost") spec.kind = ExperimentSpec::Kind::infinite_cost;
  else if (k == "counterexample") spec.kind = ExperimentSpec::Kind::counterexample;
  else throw ValidationError("experiment: unknown kind \"" + k + "\"");

  if (spec.kind != ExperimentSpec::Kind::counterexample) {
    spec.law_x = law_of(require_key(j, "law_x", "experiment"), "law_x");
    spec.law_y = law_of(require_key(j, "law_y", "experiment"), "law_y");
    spec.cost = cost_of(require_key(j, "cost", "experiment"), "cost");
    spec.eps = real_of(require_key(j, "eps", "experiment"), "eps");
    if (!(spec.eps > 0)) throw ValidationError("experiment: eps must be > 0");
    spec.schedule = reals_of(require_key(j, "schedule", "experiment"), "schedule");
  }
  if (j.contains("window")) spec.window = real_of(j.at("window"), "window");
  if (j.contains("seed")) spec.seed = seed_of(j.at("seed"), "seed");
  if (j.contains("tol")) {
    spec.tol = real_of(j.at("tol"), "tol");
    if (!(*spec.tol > 0)) throw ValidationError("experiment: tol must be > 0");
  }
  if (j.contains("max_iter")) {
    spec.max_iter = int_of(j.at("max_iter"), "max_iter");
    if (*spec.max_iter < 1) throw ValidationError("experiment: max_iter must be >= 1");
  }
  if (j.contains("perturbation")) {
    const json& p = j.at("perturbation");
    if (!p.is_string()) throw ValidationError("experiment: perturbation must be a string");
    const std::string ps = p.get<std::string>();
    if (ps == "bump") spec.perturbation = ExperimentSpec::Perturbation::bump;
    else if (ps == "marginal_shift")
      spec.perturbation = ExperimentSpec::Perturbation::marginal_shift;
    else throw ValidationError("experiment: unknown perturbation \"" + ps + "\"");
  }
  return spec;
}

const char* kind_name(ExperimentSpec::Kind kind) {
  switch (kind) {
    case ExperimentSpec::Kind::refine_marginals: return "refine_marginals";
    case ExperimentSpec::Kind::perturb_cost: return "perturb_cost";
    case ExperimentSpec::Kind::perturb_eps: return "perturb_eps";
    case ExperimentSpec::Kind::infinite_cost: return "infinite_cost";
    case ExperimentSpec::Kind::counterexample: return "counterexample";
  }
  return "unknown";
}

std::string records_to_csv(const std::vector<ExperimentRecord>& records) {
  std::string out =
      "stage_param,w1_to_reference,invariance_residual,solver_iterations,alpha_fit,notes\n";
  for (const ExperimentRecord& r : records) {
    out += format_real(r.stage_param) + ',' + format_real(r.w1_to_reference) + ',' +
           format_real(r.invariance_residual) + ',' + std::to_string(r.solver_iterations) +
           ',' + format_real(r.alpha_fit) + ',' + csv_field(r.notes) + '\n';
  }
  return out;
}

std::string counterexample_csv(const CounterexampleResult& result) {
  std::string out = records_to_csv(result.records);
  out += "verdict,," + format_real(result.limit_residual) + ",," +
         format_real(result.required_ratio) + ',' + csv_field(result.verdict) + '\n';
  return out;
}

std::string coupling_json(const Coupling& pi, const std::string& input_hash) {
  return "{\"input_hash\":\"" + json_escape(input_hash) + "\"," + coupling_body(pi) + "}";
}

std::string solve_bundle_json(const SolveReport& report, const std::string& input_hash) {
  return "{\"input_hash\":\"" + json_escape(input_hash) +
         "\",\"report\":" + to_json(report) + "}";
}

std::string check_bundle_json(const InvarianceReport& report, const std::string& input_hash) {
  return "{\"input_hash\":\"" + json_escape(input_hash) +
         "\",\"invariance\":" + to_json(report) + "}";
}

std::string experiment_bundle_json(const std::vector<ExperimentRecord>& records,
                                   ExperimentSpec::Kind kind, const std::string& input_hash) {
  return "{\"input_hash\":\"" + json_escape(input_hash) + "\",\"kind\":\"" +
         kind_name(kind) + "\",\"records\":" + records_json(records) + "}";
}

std::string counterexample_bundle_json(const CounterexampleResult& result,
                                       const std::string& input_hash) {
  std::string out = "{\"input_hash\":\"" + json_escape(input_hash) + "\"";
  out += ",\"kind\":\"counterexample\"";
  out += ",\"verdict\":\"" + json_escape(result.verdict) + "\"";
  out += ",\"limit_residual\":" + json_real(result.limit_residual);
  out += ",\"required_ratio\":" + json_real(result.required_ratio);
  out += ",\"actual_ratio\":" + json_real(result.actual_ratio);
  out += ",\"records\":" + records_json(result.records) + "}";
  return out;
}

}  // namespace eot
