#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "doctest.h"
#include "eot/cost.hpp"
#include "eot/errors.hpp"
#include "eot/measure.hpp"
#include "eot/solver.hpp"
#include "eot/stability.hpp"

using namespace eot;

namespace {

ExperimentSpec gaussian_spec(ExperimentSpec::Kind kind, std::vector<double> schedule) {
  ExperimentSpec spec;
  spec.kind = kind;
  spec.law_x = Law::gaussian(0, 1);
  spec.law_y = Law::gaussian(0, 1);
  spec.cost = CostSpec::squared_euclidean();
  spec.eps = 1.0;
  spec.schedule = std::move(schedule);
  return spec;
}

bool has_token(const std::string& notes, const std::string& token) {
  return notes.find(token) != std::string::npos;
}

}  // namespace

TEST_SUITE("stability_lab") {

TEST_CASE("marginal refinement approaches the reference") {
  const auto records = run_refine_marginals(
      gaussian_spec(ExperimentSpec::Kind::refine_marginals, {8, 16}));
  REQUIRE(records.size() == 2);
  CHECK(records[0].stage_param == 8);
  CHECK(records[1].stage_param == 16);
  CHECK(records[0].w1_to_reference > records[1].w1_to_reference);
  CHECK(records[1].w1_to_reference > 0);
  for (const auto& r : records) {
    CHECK(r.invariance_residual <= 1e-9);
    CHECK(r.solver_iterations > 0);
  }
}

TEST_CASE("cost bumps wash out as the amplitude shrinks") {
  auto spec = gaussian_spec(ExperimentSpec::Kind::perturb_cost, {0.5, 0.25});
  spec.perturbation = ExperimentSpec::Perturbation::bump;
  const auto records = run_perturb_cost(spec);
  REQUIRE(records.size() == 2);
  CHECK(records[0].w1_to_reference > records[1].w1_to_reference);
  CHECK(records[1].w1_to_reference > 0);
  for (const auto& r : records) CHECK(std::isfinite(r.alpha_fit));
}

TEST_CASE("marginal-function shifts leave the coupling untouched") {
  auto spec = gaussian_spec(ExperimentSpec::Kind::perturb_cost, {0.5, 0.25});
  spec.perturbation = ExperimentSpec::Perturbation::marginal_shift;
  const auto records = run_perturb_cost(spec);
  REQUIRE(records.size() == 2);
  for (const auto& r : records) CHECK(r.w1_to_reference <= 1e-9);
}

TEST_CASE("regularization perturbations contract toward the base solve") {
  const auto records =
      run_perturb_eps(gaussian_spec(ExperimentSpec::Kind::perturb_eps, {1.5, 1.25}));
  REQUIRE(records.size() == 2);
  CHECK(records[0].w1_to_reference > records[1].w1_to_reference);
  CHECK(records[1].w1_to_reference > 0);
}

TEST_CASE("perturbation schedules are validated") {
  auto spec = gaussian_spec(ExperimentSpec::Kind::perturb_eps, {1.5, 1.5});
  CHECK_THROWS_AS(run_perturb_eps(spec), ValidationError);
  spec.schedule = {1.5, -0.25};
  CHECK_THROWS_AS(run_perturb_eps(spec), ValidationError);
  spec.schedule.clear();
  CHECK_THROWS_AS(run_perturb_eps(spec), ValidationError);

  auto refine = gaussian_spec(ExperimentSpec::Kind::refine_marginals, {16.5, 32});
  CHECK_THROWS_AS(run_refine_marginals(refine), ValidationError);
  refine.schedule = {32, 16};
  CHECK_THROWS_AS(run_refine_marginals(refine), ValidationError);

  CHECK_THROWS_AS(
      run_infinite_cost(gaussian_spec(ExperimentSpec::Kind::infinite_cost, {16, 32})),
      ValidationError);  // demands cauchy marginals
  CHECK_THROWS_AS(
      run_refine_marginals(gaussian_spec(ExperimentSpec::Kind::perturb_eps, {8, 16})),
      ValidationError);  // kind/runner mismatch
}

TEST_CASE("infinite-cost runs flag the regime and stay invariant in-window") {
  ExperimentSpec spec;
  spec.kind = ExperimentSpec::Kind::infinite_cost;
  spec.law_x = Law::cauchy(0, 1);
  spec.law_y = Law::cauchy(0, 1);
  spec.cost = CostSpec::squared_euclidean();
  spec.eps = 1.0;
  spec.schedule = {16, 32};
  spec.window = 3.0;
  spec.tol = 1e-5;
  spec.max_iter = 20000;

  const auto records = run_infinite_cost(spec);
  REQUIRE(records.size() == 2);
  CHECK(std::isnan(records[0].w1_to_reference));  // no predecessor stage
  CHECK(records[1].w1_to_reference > 0);
  for (const auto& r : records) {
    CHECK(has_token(r.notes, "expected_cost="));
    CHECK(has_token(r.notes, "window_mass="));
    CHECK(has_token(r.notes, "continuum_regime=infinite_cost"));
    CHECK(has_token(r.notes, "discrete_finiteness=true"));
    CHECK(r.invariance_residual <= 1e-9);
  }
}

TEST_CASE("window restriction keeps only the central block") {
  const std::vector<Point> pts = {Point{0.0}, Point{5.0}};
  const Coupling pi(pts, pts, {0.4, 0.1, 0.1, 0.4});
  const Coupling w = restrict_window(pi, 1.0);
  CHECK(w.rows() == 1);
  CHECK(w.cols() == 1);
  CHECK(w.at(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(restrict_window(pi, -1.0), ValidationError);

  const Coupling far(pts, pts, {0.0, 0.5, 0.5, 0.0});
  CHECK_THROWS_AS(restrict_window(far, 1.0), ValidationError);
}

TEST_CASE("stage distance is exact for small supports") {
  const std::vector<Point> pts = {Point{0.0}, Point{1.0}};
  const Coupling a(pts, pts, {0.5, 0.0, 0.0, 0.5});
  const Coupling b(pts, pts, {0.0, 0.5, 0.5, 0.0});
  CHECK(stage_w1(a, a) == doctest::Approx(0.0).epsilon(1e-12));
  // moving each half-unit of mass across one column step costs max(0,1) = 1
  CHECK(stage_w1(a, b) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("density probes hover near one for solved gaussian instances") {
  const DiscreteMeasure mu = quantize(Law::gaussian(0, 1), 12);
  const DiscreteMeasure nu = quantize(Law::gaussian(0, 1), 12);
  const CostMatrix c = evaluate_cost(CostSpec::squared_euclidean(), mu.atoms(), nu.atoms());
  const Coupling P = product_measure(mu, nu);
  const GibbsKernel kernel = gibbs_kernel(c, 1.0, P);
  const SolveResult res = sinkhorn(kernel, mu, nu, {1e-12, 50000});
  REQUIRE(res.report.converged);
  const Coupling R = reference_measure(kernel, P);

  const std::vector<std::pair<Point, Point>> centers = {
      {mu.atom(5), nu.atom(5)}, {mu.atom(2), nu.atom(9)}};
  const auto probes = density_probe(res.coupling, R, centers, {1.5, 0.75});
  REQUIRE(probes.size() == 4);  // center-major, radius-minor
  for (const auto& p : probes) {
    CHECK(p.ratio_pi_over_R > 0.2);
    CHECK(p.ratio_pi_over_R < 5.0);
  }
  // on-diagonal probes should sit close to the density value 1
  CHECK(std::abs(probes[0].ratio_pi_over_R - 1.0) < 0.5);
  CHECK(std::abs(probes[1].ratio_pi_over_R - 1.0) < 0.5);

  CHECK_THROWS_AS(density_probe(res.coupling, R, centers, {0.75, 1.5}),
                  ValidationError);  // radii must be nonincreasing
  CHECK_THROWS_AS(density_probe(res.coupling, R, centers, {}), ValidationError);
}

TEST_CASE("the built-in counterexample reproduces the instability") {
  const CounterexampleResult res = run_counterexample();
  CHECK(res.verdict == "instability reproduced");
  // limit coupling: log ratio of the cross products is exactly the cost gap,
  // giving residual |0 - 1| = 1 and cross ratio e^{-1} required vs 1 actual
  CHECK(std::abs(res.limit_residual - 1.0) <= 1e-12);
  CHECK(std::abs(res.required_ratio - 0.36787944117144233) <= 1e-15);
  CHECK(std::abs(res.actual_ratio - 1.0) <= 1e-12);

  REQUIRE(res.records.size() == 6);
  for (const auto& r : res.records) {
    CHECK(r.invariance_residual <= 1e-10);
    CHECK(has_token(r.notes, "cost_vanishes_on_support=true"));
  }
  // the pre-limit couplings converge to the limit coupling in W1
  for (std::size_t i = 1; i < res.records.size(); ++i)
    CHECK(res.records[i].w1_to_reference < res.records[i - 1].w1_to_reference);
}

TEST_CASE("the dispatcher routes every kind") {
  const auto refine =
      run_experiment(gaussian_spec(ExperimentSpec::Kind::refine_marginals, {8, 16}));
  CHECK(refine.size() == 2);

  ExperimentSpec ce;
  ce.kind = ExperimentSpec::Kind::counterexample;
  const auto records = run_experiment(ce);
  CHECK(records.size() == 6);
}

}  // TEST_SUITE
