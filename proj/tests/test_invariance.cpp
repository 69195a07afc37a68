#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "doctest.h"
#include "eot/cost.hpp"
#include "eot/errors.hpp"
#include "eot/invariance.hpp"
#include "eot/measure.hpp"
#include "eot/solver.hpp"

using namespace eot;

namespace {

struct Solved {
  DiscreteMeasure mu, nu;
  CostMatrix c;
  Coupling P;
  GibbsKernel kernel;
  Coupling R;
  SolveResult res;
};

Solved solve_random(std::size_t n, std::size_t m, double eps, std::uint64_t seed,
                    long max_iter = 50000, double tol = 1e-13) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto measure = [&](std::size_t k) {
    std::vector<Point> atoms;
    std::vector<double> w;
    double total = 0;
    for (std::size_t i = 0; i < k; ++i) {
      atoms.push_back(Point{static_cast<double>(i)});
      w.push_back(0.1 + unif(rng));
      total += w.back();
    }
    for (double& x : w) x /= total;
    return DiscreteMeasure(std::move(atoms), std::move(w));
  };
  DiscreteMeasure mu = measure(n), nu = measure(m);
  std::vector<double> cv(n * m);
  for (double& x : cv) x = unif(rng);
  CostMatrix c(n, m, std::move(cv));
  Coupling P = product_measure(mu, nu);
  GibbsKernel kernel = gibbs_kernel(c, eps, P);
  Coupling R = reference_measure(kernel, P);
  SolveResult res = sinkhorn(kernel, mu, nu, {tol, max_iter});
  return {std::move(mu), std::move(nu), std::move(c), std::move(P), std::move(kernel),
          std::move(R),  std::move(res)};
}

}  // namespace

TEST_SUITE("invariance") {

TEST_CASE("single-pair cycles have zero residual by construction") {
  const Solved s = solve_random(3, 3, 1.0, 1);
  const Cycle k1{{{1, 2}}};
  CHECK(cycle_residual_eot(s.res.coupling, s.c, 1.0, s.P, k1) == 0.0);
  CHECK(cycle_residual_general(s.res.coupling, s.R, k1) == 0.0);
}

TEST_CASE("solved couplings are invariant along explicit cycles") {
  const Solved s = solve_random(4, 5, 0.6, 2);
  REQUIRE(s.res.report.converged);
  const std::vector<Cycle> cycles = {
      {{{0, 0}, {1, 1}}},
      {{{0, 4}, {3, 2}, {2, 0}}},
      {{{1, 1}, {1, 3}, {2, 1}, {3, 0}}},  // repeated row indices are fine
  };
  for (const Cycle& cyc : cycles) {
    CHECK(cycle_residual_eot(s.res.coupling, s.c, 0.6, s.P, cyc) <= 1e-11);
    CHECK(cycle_residual_general(s.res.coupling, s.R, cyc) <= 1e-11);
  }
}

TEST_CASE("the product reference detects a non-invariant coupling") {
  // A coupling with uniform marginals but a planted asymmetry: not the
  // entropic optimizer for the absolute cost, so some 2-cycle must fail.
  const std::vector<Point> pts = {Point{0.0}, Point{1.0}};
  const Coupling skew(pts, pts, {0.4, 0.1, 0.1, 0.4});
  const DiscreteMeasure coin(pts, {0.5, 0.5});
  const Coupling P = product_measure(coin, coin);
  const CostMatrix c = evaluate_cost(CostSpec::absolute(), pts, pts);
  const GibbsKernel kernel = gibbs_kernel(c, 1.0, P);

  const InvarianceReport rep = check_invariance(skew, kernel, P, 2);
  CHECK(rep.mode == InvarianceReport::Mode::exhaustive);
  // residual along the diagonal 2-cycle: |log(0.4*0.4/(0.1*0.1)) - 2| = ...
  CHECK(rep.max_residual > 0.5);
  CHECK(rep.worst_cycle.pairs.size() == 2);
}

TEST_CASE("exhaustive and sampled modes agree on a clean coupling") {
  const Solved s = solve_random(3, 3, 1.0, 3);
  REQUIRE(s.res.report.converged);

  const InvarianceReport ex = check_invariance(s.res.coupling, s.kernel, s.P, 3);
  CHECK(ex.mode == InvarianceReport::Mode::exhaustive);
  CHECK(ex.cycles_checked > 0);
  CHECK(ex.max_residual <= 1e-11);

  const InvarianceReport sampled = check_invariance(s.res.coupling, s.kernel, s.P, 3,
                                                    /*budget=*/100, /*seed=*/9);
  CHECK(sampled.mode == InvarianceReport::Mode::sampled);
  CHECK(sampled.cycles_checked == 100);
  CHECK(sampled.max_residual <= 1e-11);

  // same seed, same draws
  const InvarianceReport again = check_invariance(s.res.coupling, s.kernel, s.P, 3,
                                                  /*budget=*/100, /*seed=*/9);
  CHECK(again.max_residual == sampled.max_residual);
  CHECK(again.worst_cycle.pairs == sampled.worst_cycle.pairs);
}

TEST_CASE("partial sinkhorn iterates are already invariant") {
  // stop far from feasibility: the iterate still factorizes over the kernel
  std::mt19937_64 rng(17);
  const Solved s = solve_random(5, 4, 0.15, 17, /*max_iter=*/4);
  CHECK_FALSE(s.res.report.converged);
  const InvarianceReport rep = check_invariance(s.res.coupling, s.kernel, s.P, 3);
  CHECK(rep.max_residual <= 1e-10);
}

TEST_CASE("invariance against an explicit reference coupling") {
  const Solved s = solve_random(4, 4, 0.9, 4);
  const InvarianceReport rep = check_invariance(s.res.coupling, s.R, 3);
  CHECK(rep.max_residual <= 1e-10);
}

TEST_CASE("support violations and bad arguments throw") {
  const std::vector<Point> pts = {Point{0.0}, Point{1.0}};
  const Coupling degenerate(pts, pts, {0.5, 0.0, 0.0, 0.5});
  const DiscreteMeasure coin(pts, {0.5, 0.5});
  const Coupling P = product_measure(coin, coin);
  const CostMatrix c = evaluate_cost(CostSpec::zero(), pts, pts);
  const GibbsKernel kernel = gibbs_kernel(c, 1.0, P);

  const Cycle touching_zero{{{0, 0}, {1, 0}}};
  CHECK_THROWS_AS(cycle_residual_eot(degenerate, c, 1.0, P, touching_zero),
                  SupportViolation);
  CHECK_THROWS_AS(check_invariance(degenerate, kernel, P, 2), SupportViolation);

  const Solved s = solve_random(3, 3, 1.0, 5);
  CHECK_THROWS_AS(check_invariance(s.res.coupling, s.kernel, s.P, 1), ValidationError);
  CHECK_THROWS_AS(check_invariance(s.res.coupling, s.kernel, s.P, 2, 0), ValidationError);
  const Cycle out_of_range{{{7, 0}, {0, 1}}};
  CHECK_THROWS_AS(cycle_residual_general(s.res.coupling, s.R, out_of_range),
                  ValidationError);
}

TEST_CASE("factorize recovers working potentials") {
  const Solved s = solve_random(5, 6, 0.5, 6);
  REQUIRE(s.res.report.converged);
  const Potentials pot = factorize(s.res.coupling, s.R);
  double worst = 0;
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 6; ++j) {
      const double rebuilt =
          std::exp(pot.log_phi[i] + pot.log_psi[j]) * s.R.at(i, j);
      worst = std::max(worst, std::abs(rebuilt - s.res.coupling.at(i, j)));
    }
  CHECK(worst <= 1e-12);
}

TEST_CASE("factorize rejects a corrupted coupling with a located witness") {
  const Solved s = solve_random(4, 4, 0.8, 7);
  REQUIRE(s.res.report.converged);

  // multiply one off-hub entry by (1 + 2e-4) and renormalize; the global
  // rescaling is pure gauge, so the defect stays at the chosen cell
  std::vector<double> m = s.res.coupling.mass();
  std::size_t hub = 0;
  for (std::size_t k = 0; k < m.size(); ++k)
    if (m[k] > m[hub]) hub = k;
  const std::size_t victim = (hub + 5) % m.size();
  m[victim] *= 1.0 + 2e-4;
  double total = 0;
  for (const double v : m) total += v;
  for (double& v : m) v /= total;
  const Coupling bad(s.res.coupling.row_support(), s.res.coupling.col_support(), m);

  bool threw = false;
  try {
    factorize(bad, s.R);
  } catch (const NotInvariant& e) {
    threw = true;
    CHECK(e.gap > 1e-6);
    const bool located = e.row == victim / 4 || e.col == victim % 4;
    CHECK(located);
  }
  CHECK(threw);
}

TEST_CASE("factorize requires strictly positive inputs") {
  const std::vector<Point> pts = {Point{0.0}, Point{1.0}};
  const Coupling degenerate(pts, pts, {0.5, 0.0, 0.0, 0.5});
  const Coupling uniform(pts, pts, {0.25, 0.25, 0.25, 0.25});
  CHECK_THROWS_AS(factorize(degenerate, uniform), SupportViolation);
  CHECK_THROWS_AS(factorize(uniform, degenerate), SupportViolation);
}

TEST_CASE("rectangle identity holds for the zero-cost family") {
  // zero cost: R = P and the optimizer is P itself, so rectangle products
  // along straight and crossed index sets must agree
  std::mt19937_64 rng(21);
  const Solved s = solve_random(5, 5, 1.0, 21);
  const CostMatrix zero = evaluate_cost(CostSpec::zero(), s.mu.atoms(), s.nu.atoms());
  const GibbsKernel kernel = gibbs_kernel(zero, 1.0, s.P);
  const SolveResult res = sinkhorn(kernel, s.mu, s.nu, {1e-14, 1000});
  REQUIRE(res.report.converged);

  const Rectangle a{{0, 2}, {1, 3}};
  const Rectangle b{{1, 3, 4}, {0, 2}};
  CHECK(rectangle_identity_product(res.coupling, a, b) <= 1e-12);
}

TEST_CASE("rectangle inequality holds on solved instances") {
  const Solved s = solve_random(6, 5, 0.7, 8);
  REQUIRE(s.res.report.converged);
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<std::size_t> nrow(1, 5), ncol(1, 4);
  auto subset = [&](std::size_t bound, std::size_t want) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < bound; ++i) idx.push_back(i);
    for (std::size_t i = 0; i < want; ++i)
      std::swap(idx[i], idx[i + rng() % (bound - i)]);
    idx.resize(want);
    return idx;
  };
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t k = 2 + rep % 2;
    std::vector<Rectangle> rects;
    for (std::size_t t = 0; t < k; ++t)
      rects.push_back({subset(6, nrow(rng)), subset(5, ncol(rng))});
    const RectangleCheck chk = rectangle_inequality(s.res.coupling, s.R, s.P, rects);
    CHECK(chk.holds);
    CHECK(chk.lhs <= chk.rhs * (1.0 + 1e-12));
  }
}

TEST_CASE("rectangle checks reject empty-mass rectangles") {
  const std::vector<Point> pts = {Point{0.0}, Point{1.0}};
  const Coupling degenerate(pts, pts, {0.5, 0.0, 0.0, 0.5});
  const Rectangle offdiag{{0}, {1}};
  const Rectangle diag{{0}, {0}};
  CHECK_THROWS_AS(rectangle_identity_product(degenerate, offdiag, diag),
                  SupportViolation);
}

}  // TEST_SUITE
