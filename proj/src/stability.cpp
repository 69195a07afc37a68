#include "eot/stability.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "eot/errors.hpp"
#include "eot/invariance.hpp"
#include "eot/solver.hpp"
#include "transport_simplex.hpp"

namespace eot {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr int kAggGrid = 24;                  // aggregation cells per axis
constexpr std::size_t kExactAtomCap = 2048;   // mirrors the exact-W1 cap
constexpr std::size_t kPerturbSupport = 24;   // perturb_* marginal size

std::string real_token(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void append_note(std::string& notes, const std::string& token) {
  if (!notes.empty()) notes += "; ";
  notes += token;
}

void require_kind(const ExperimentSpec& spec, ExperimentSpec::Kind kind,
                  const char* name) {
  if (spec.kind != kind)
    throw ValidationError(std::string(name) + ": spec built for a different experiment");
}

void require_monotone(const std::vector<double>& s) {
  if (s.empty()) throw ValidationError("experiment schedule must be nonempty");
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    const bool inc = s[1] > s[0];
    if (inc ? !(s[i + 1] > s[i]) : !(s[i + 1] < s[i]))
      throw ValidationError("experiment schedule must be strictly monotone");
  }
}

std::vector<std::size_t> size_schedule(const std::vector<double>& s) {
  require_monotone(s);
  if (s.size() > 1 && s[1] < s[0])
    throw ValidationError("support-size schedule must increase");
  std::vector<std::size_t> out;
  for (double v : s) {
    if (!(v >= 2) || v != std::floor(v) || v > 1e7)
      throw ValidationError("support-size schedule entries must be integers >= 2");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

SolveConfig solver_config(const ExperimentSpec& spec, double tol_default,
                          long iter_default) {
  SolveConfig cfg;
  cfg.tol = spec.tol.value_or(tol_default);
  cfg.max_iter = spec.max_iter.value_or(iter_default);
  return cfg;
}

struct Stage {
  DiscreteMeasure mu, nu;
  CostMatrix c;
  GibbsKernel kernel;
  Coupling P;
  SolveResult sol;
};

Stage solve_stage(DiscreteMeasure mu, DiscreteMeasure nu, CostMatrix c, double eps,
                  const SolveConfig& cfg) {
  Coupling P = product_measure(mu, nu);
  GibbsKernel kernel = gibbs_kernel(c, eps, P);
  SolveResult sol = sinkhorn(kernel, mu, nu, cfg);
  return {std::move(mu), std::move(nu), std::move(c),
          std::move(kernel), std::move(P), std::move(sol)};
}

Stage stage_from_laws(const ExperimentSpec& spec, std::size_t n, double eps,
                      const SolveConfig& cfg) {
  DiscreteMeasure mu = quantize(spec.law_x, n), nu = quantize(spec.law_y, n);
  CostMatrix c = evaluate_cost(spec.cost, mu.atoms(), nu.atoms());
  return solve_stage(std::move(mu), std::move(nu), std::move(c), eps, cfg);
}

double stage_invariance(const Stage& st, std::uint64_t seed) {
  return check_invariance(st.sol.coupling, st.kernel, st.P, 2, kDefaultCycleBudget, seed)
      .max_residual;
}

void flag_convergence(const SolveResult& sol, std::string& notes) {
  if (!sol.report.converged)
    append_note(notes, "solver_not_converged marginal_error=" +
                           real_token(sol.report.marginal_error));
}

double median_kernel_ratio(const std::vector<double>& ld_now,
                           const std::vector<double>& ld_prev) {
  if (ld_now.size() != ld_prev.size() || ld_now.empty()) return kNaN;
  std::vector<double> r(ld_now.size());
  for (std::size_t k = 0; k < r.size(); ++k) r[k] = std::exp(ld_now[k] - ld_prev[k]);
  std::sort(r.begin(), r.end());
  const std::size_t n = r.size();
  return n % 2 ? r[n / 2] : 0.5 * (r[n / 2 - 1] + r[n / 2]);
}

// Product-space atom clouds for the aggregated-W1 fallback.
struct Cloud {
  std::vector<Point> pos;  // x coordinates then y coordinates
  std::vector<double> mass;
  std::size_t split = 0;  // index of the first y coordinate
};

Cloud cloud_of(const Coupling& pi) {
  Cloud c;
  c.split = pi.row_support().empty() ? 0 : pi.row_support()[0].dim();
  for (std::size_t i = 0; i < pi.rows(); ++i)
    for (std::size_t j = 0; j < pi.cols(); ++j) {
      const double w = pi.at(i, j);
      if (w <= 0) continue;
      std::vector<double> coords = pi.row_support()[i].coords;
      const auto& y = pi.col_support()[j].coords;
      coords.insert(coords.end(), y.begin(), y.end());
      c.pos.emplace_back(std::move(coords));
      c.mass.push_back(w);
    }
  return c;
}

// Mass-weighted barycenters on a per-axis grid of kAggGrid cells over
// [lo, hi]; the shared scalar range keeps the cells square and the pairing
// of the two clouds meaningful. Cell order is by key, so output is
// deterministic.
Cloud aggregate(const Cloud& in, double lo, double hi, int m) {
  const std::size_t d = in.pos.empty() ? 0 : in.pos[0].dim();
  const double span = std::max(hi - lo, 1e-300);
  std::map<long, std::pair<std::vector<double>, double>> cells;
  for (std::size_t a = 0; a < in.pos.size(); ++a) {
    long key = 0;
    for (std::size_t k = 0; k < d; ++k) {
      int idx = static_cast<int>((in.pos[a][k] - lo) / span * m);
      idx = std::clamp(idx, 0, m - 1);
      key = key * m + idx;
    }
    auto& cell = cells[key];
    if (cell.first.empty()) cell.first.assign(d, 0.0);
    for (std::size_t k = 0; k < d; ++k) cell.first[k] += in.mass[a] * in.pos[a][k];
    cell.second += in.mass[a];
  }
  Cloud out;
  out.split = in.split;
  for (auto& [key, cell] : cells) {
    (void)key;
    for (double& v : cell.first) v /= cell.second;
    out.pos.emplace_back(std::move(cell.first));
    out.mass.push_back(cell.second);
  }
  return out;
}

double product_max_dist(const Point& a, const Point& b, std::size_t split) {
  double dx = 0, dy = 0;
  for (std::size_t k = 0; k < a.dim(); ++k) {
    const double d2 = (a[k] - b[k]) * (a[k] - b[k]);
    (k < split ? dx : dy) += d2;
  }
  return std::max(std::sqrt(dx), std::sqrt(dy));
}

double lp_w1(const Cloud& a, const Cloud& b) {
  const std::size_t n = a.pos.size(), m = b.pos.size();
  std::vector<double> D(n * m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      D[i * m + j] = product_max_dist(a.pos[i], b.pos[j], a.split);
  return detail::transport_optimal_cost(a.mass, b.mass, D);
}

double window_mass(const Coupling& pi, double w) {
  double s = 0;
  for (std::size_t i = 0; i < pi.rows(); ++i)
    for (std::size_t j = 0; j < pi.cols(); ++j) {
      bool in = true;
      for (double v : pi.row_support()[i].coords) in = in && std::abs(v) <= w;
      for (double v : pi.col_support()[j].coords) in = in && std::abs(v) <= w;
      if (in) s += pi.at(i, j);
    }
  return s;
}

}  // namespace

double stage_w1(const Coupling& a, const Coupling& b) {
  const Cloud ca = cloud_of(a), cb = cloud_of(b);
  if (ca.pos.size() + cb.pos.size() <= kExactAtomCap)
    return wasserstein1(a, b, GroundMetric::product_max);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const Cloud* c : {&ca, &cb})
    for (const Point& p : c->pos)
      for (double v : p.coords) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
  return lp_w1(aggregate(ca, lo, hi, kAggGrid), aggregate(cb, lo, hi, kAggGrid));
}

Coupling restrict_window(const Coupling& pi, double window) {
  if (!(window > 0)) throw ValidationError("restrict_window: window must be > 0");
  auto inside = [&](const Point& p) {
    for (double v : p.coords)
      if (std::abs(v) > window) return false;
    return true;
  };
  std::vector<std::size_t> ri, cj;
  for (std::size_t i = 0; i < pi.rows(); ++i)
    if (inside(pi.row_support()[i])) ri.push_back(i);
  for (std::size_t j = 0; j < pi.cols(); ++j)
    if (inside(pi.col_support()[j])) cj.push_back(j);
  if (ri.empty() || cj.empty())
    throw ValidationError("restrict_window: window misses the support");
  std::vector<double> mass;
  mass.reserve(ri.size() * cj.size());
  double total = 0;
  for (std::size_t i : ri)
    for (std::size_t j : cj) {
      mass.push_back(pi.at(i, j));
      total += mass.back();
    }
  if (!(total > 0)) throw ValidationError("restrict_window: window carries no mass");
  for (double& v : mass) v /= total;
  std::vector<Point> rs, cs;
  for (std::size_t i : ri) rs.push_back(pi.row_support()[i]);
  for (std::size_t j : cj) cs.push_back(pi.col_support()[j]);
  return Coupling(std::move(rs), std::move(cs), std::move(mass));
}

std::vector<ExperimentRecord> run_refine_marginals(const ExperimentSpec& spec) {
  require_kind(spec, ExperimentSpec::Kind::refine_marginals, "run_refine_marginals");
  const std::vector<std::size_t> sizes = size_schedule(spec.schedule);
  const SolveConfig cfg = solver_config(spec, 1e-12, 100000);
  const Stage ref = stage_from_laws(spec, sizes.back() * 4, spec.eps, cfg);
  std::string ref_flag;
  flag_convergence(ref.sol, ref_flag);

  std::vector<ExperimentRecord> records;
  for (std::size_t n : sizes) {
    const Stage st = stage_from_laws(spec, n, spec.eps, cfg);
    ExperimentRecord rec;
    rec.stage_param = static_cast<double>(n);
    rec.w1_to_reference = stage_w1(st.sol.coupling, ref.sol.coupling);
    rec.invariance_residual = stage_invariance(st, spec.seed);
    rec.solver_iterations = st.sol.report.iterations;
    rec.alpha_fit = kNaN;  // supports move between stages
    flag_convergence(st.sol, rec.notes);
    if (!ref_flag.empty()) append_note(rec.notes, "reference " + ref_flag);
    records.push_back(std::move(rec));
  }
  return records;
}

namespace {

CostMatrix perturbed_cost(const CostMatrix& base, const std::vector<Point>& xs,
                          const std::vector<Point>& ys, double delta,
                          ExperimentSpec::Perturbation mode) {
  std::vector<double> v = base.values();
  for (std::size_t i = 0; i < base.rows(); ++i)
    for (std::size_t j = 0; j < base.cols(); ++j) {
      const double x = xs[i][0], y = ys[j][0];
      const double bump = mode == ExperimentSpec::Perturbation::bump
                              ? std::sin(x + y)
                              : 0.25 * std::sin(3 * x) + 0.4 * std::cos(y);
      v[i * base.cols() + j] += delta * bump;
    }
  return CostMatrix(base.rows(), base.cols(), std::move(v));
}

std::vector<ExperimentRecord> run_perturb(const ExperimentSpec& spec, bool cost_mode) {
  require_monotone(spec.schedule);
  const SolveConfig cfg = solver_config(spec, 1e-12, 100000);
  DiscreteMeasure mu = quantize(spec.law_x, kPerturbSupport);
  DiscreteMeasure nu = quantize(spec.law_y, kPerturbSupport);
  const CostMatrix base = evaluate_cost(spec.cost, mu.atoms(), nu.atoms());
  const Stage ref = solve_stage(mu, nu, base, spec.eps, cfg);
  std::string ref_flag;
  flag_convergence(ref.sol, ref_flag);

  std::vector<ExperimentRecord> records;
  std::vector<double> prev_ld = ref.kernel.log_density_values();
  for (double s : spec.schedule) {
    if (!cost_mode && !(s > 0))
      throw ValidationError("perturb_eps schedule entries must be > 0");
    const Stage st =
        cost_mode
            ? solve_stage(mu, nu, perturbed_cost(base, mu.atoms(), nu.atoms(), s,
                                                 spec.perturbation),
                          spec.eps, cfg)
            : solve_stage(mu, nu, base, s, cfg);
    ExperimentRecord rec;
    rec.stage_param = s;
    rec.w1_to_reference = stage_w1(st.sol.coupling, ref.sol.coupling);
    rec.invariance_residual = stage_invariance(st, spec.seed);
    rec.solver_iterations = st.sol.report.iterations;
    rec.alpha_fit = median_kernel_ratio(st.kernel.log_density_values(), prev_ld);
    prev_ld = st.kernel.log_density_values();
    flag_convergence(st.sol, rec.notes);
    if (!ref_flag.empty()) append_note(rec.notes, "reference " + ref_flag);
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace

std::vector<ExperimentRecord> run_perturb_cost(const ExperimentSpec& spec) {
  require_kind(spec, ExperimentSpec::Kind::perturb_cost, "run_perturb_cost");
  return run_perturb(spec, true);
}

std::vector<ExperimentRecord> run_perturb_eps(const ExperimentSpec& spec) {
  require_kind(spec, ExperimentSpec::Kind::perturb_eps, "run_perturb_eps");
  return run_perturb(spec, false);
}

std::vector<ExperimentRecord> run_infinite_cost(const ExperimentSpec& spec) {
  require_kind(spec, ExperimentSpec::Kind::infinite_cost, "run_infinite_cost");
  if (spec.law_x.kind != Law::Kind::cauchy || spec.law_y.kind != Law::Kind::cauchy)
    throw ValidationError("run_infinite_cost: marginals must be cauchy laws");
  if (spec.cost.kind != CostSpec::Kind::squared_euclidean)
    throw ValidationError("run_infinite_cost: cost must be squared_euclidean");
  const std::vector<std::size_t> sizes = size_schedule(spec.schedule);
  const double w = spec.window.value_or(3.0);
  if (!(w > 0)) throw ValidationError("run_infinite_cost: window must be > 0");
  const SolveConfig cfg = solver_config(spec, 1e-6, 20000);

  std::vector<ExperimentRecord> records;
  std::optional<Coupling> prev;
  for (std::size_t n : sizes) {
    const Stage st = stage_from_laws(spec, n, spec.eps, cfg);
    double expected_cost = 0;
    for (std::size_t k = 0; k < st.c.values().size(); ++k)
      expected_cost += st.c.values()[k] * st.sol.coupling.mass()[k];

    const double frac = window_mass(st.sol.coupling, w);
    const Coupling pw = restrict_window(st.sol.coupling, w);
    const Coupling Rw = restrict_window(reference_measure(st.kernel, st.P), w);

    ExperimentRecord rec;
    rec.stage_param = static_cast<double>(n);
    rec.w1_to_reference = prev ? stage_w1(*prev, pw) : kNaN;
    rec.invariance_residual =
        check_invariance(pw, Rw, 2, kDefaultCycleBudget, spec.seed).max_residual;
    rec.solver_iterations = st.sol.report.iterations;
    rec.alpha_fit = kNaN;  // supports move between stages
    append_note(rec.notes, "expected_cost=" + real_token(expected_cost));
    append_note(rec.notes, "window_mass=" + real_token(frac));
    append_note(rec.notes, "continuum_regime=infinite_cost");
    append_note(rec.notes, std::string("discrete_finiteness=") +
                               (finiteness_check(st.c, st.P) ? "true" : "false"));
    if (frac < 0.5) append_note(rec.notes, "window captures under half the mass");
    flag_convergence(st.sol, rec.notes);
    records.push_back(std::move(rec));
    prev = pw;
  }
  return records;
}

CounterexampleResult run_counterexample() {
  const CostSpec cost = CostSpec::quadrant(1, 1);
  const std::vector<Point> lim_atoms = {Point{0.0}, Point{1.0}};
  const DiscreteMeasure lim_mu(lim_atoms, {0.5, 0.5});
  const Coupling lim_pi(lim_atoms, lim_atoms, {0.25, 0.25, 0.25, 0.25});
  const Coupling lim_P = product_measure(lim_mu, lim_mu);
  const CostMatrix lim_c = evaluate_cost(cost, lim_atoms, lim_atoms);
  Cycle diag;
  diag.pairs = {{0, 0}, {1, 1}};

  CounterexampleResult out;
  out.limit_residual = cycle_residual_eot(lim_pi, lim_c, 1.0, lim_P, diag);
  out.required_ratio = std::exp(lim_c.at(0, 1) + lim_c.at(1, 0) - lim_c.at(0, 0) -
                                lim_c.at(1, 1));
  out.actual_ratio =
      (lim_pi.at(0, 1) * lim_pi.at(1, 0)) / (lim_pi.at(0, 0) * lim_pi.at(1, 1));

  bool pre_limit_clean = true;
  for (std::size_t n : {2, 4, 8, 16, 32, 64}) {
    const std::vector<Point> atoms = {Point{0.0},
                                      Point{1.0 - 1.0 / static_cast<double>(n)}};
    const DiscreteMeasure mu(atoms, {0.5, 0.5});
    const CostMatrix c = evaluate_cost(cost, atoms, atoms);
    bool vanishes = true;
    for (double v : c.values()) vanishes = vanishes && v == 0.0;
    const Coupling P = product_measure(mu, mu);
    const GibbsKernel kernel = gibbs_kernel(c, 1.0, P);
    const SolveResult sol = sinkhorn(kernel, mu, mu, {});

    ExperimentRecord rec;
    rec.stage_param = static_cast<double>(n);
    rec.w1_to_reference = wasserstein1(sol.coupling, lim_pi, GroundMetric::product_max);
    rec.invariance_residual = check_invariance(sol.coupling, kernel, P, 2).max_residual;
    rec.solver_iterations = sol.report.iterations;
    rec.alpha_fit = kNaN;
    append_note(rec.notes, std::string("cost_vanishes_on_support=") +
                               (vanishes ? "true" : "false"));
    flag_convergence(sol, rec.notes);
    pre_limit_clean =
        pre_limit_clean && vanishes && rec.invariance_residual <= 1e-10;
    out.records.push_back(std::move(rec));
  }
  out.verdict = (out.limit_residual >= 0.999 && pre_limit_clean)
                    ? "instability reproduced"
                    : "instability not reproduced";
  return out;
}

std::vector<ExperimentRecord> run_experiment(const ExperimentSpec& spec) {
  switch (spec.kind) {
    case ExperimentSpec::Kind::refine_marginals:
      return run_refine_marginals(spec);
    case ExperimentSpec::Kind::perturb_cost:
      return run_perturb_cost(spec);
    case ExperimentSpec::Kind::perturb_eps:
      return run_perturb_eps(spec);
    case ExperimentSpec::Kind::infinite_cost:
      return run_infinite_cost(spec);
    case ExperimentSpec::Kind::counterexample:
      return run_counterexample().records;
  }
  throw ValidationError("run_experiment: unknown experiment kind");
}

std::vector<DensityProbe> density_probe(const Coupling& pi, const Coupling& R,
                                        const std::vector<std::pair<Point, Point>>& centers,
                                        const std::vector<double>& radii) {
  if (radii.empty()) throw ValidationError("density_probe: no radii");
  for (std::size_t t = 0; t < radii.size(); ++t) {
    if (!(radii[t] > 0)) throw ValidationError("density_probe: radii must be > 0");
    if (t > 0 && radii[t] > radii[t - 1])
      throw ValidationError("density_probe: radii must be nonincreasing");
  }
  auto ball_mass = [](const Coupling& g, const Point& cx, const Point& cy, double r) {
    std::vector<char> rin(g.rows()), cin(g.cols());
    for (std::size_t i = 0; i < g.rows(); ++i)
      rin[i] = euclidean_distance(g.row_support()[i], cx) <= r;
    for (std::size_t j = 0; j < g.cols(); ++j)
      cin[j] = euclidean_distance(g.col_support()[j], cy) <= r;
    double s = 0;
    for (std::size_t i = 0; i < g.rows(); ++i) {
      if (!rin[i]) continue;
      for (std::size_t j = 0; j < g.cols(); ++j)
        if (cin[j]) s += g.at(i, j);
    }
    return s;
  };

  std::vector<DensityProbe> out;
  for (const auto& [cx, cy] : centers)
    for (double r : radii) {
      DensityProbe p{cx, cy, r, kNaN, ""};
      const double rm = ball_mass(R, cx, cy, r);
      if (rm > 0)
        p.ratio_pi_over_R = ball_mass(pi, cx, cy, r) / rm;
      else
        p.note = "reference ball carries no mass";
      out.push_back(std::move(p));
    }
  return out;
}

}  // namespace eot
