#pragma once

// Independent, slow, high-precision references. Nothing here shares code
// with the production solver: the 2x2 oracle is a scalar line search, the
// general oracle is a damped Newton method on the dual, and the invariance
// oracle re-enumerates cycles from scratch. They exist to be disagreed with.

#include <cstddef>
#include <vector>

#include "eot/cost.hpp"
#include "eot/measure.hpp"

namespace eot {

struct OracleResult {
  Coupling coupling;
  double objective = 0;  // primal value: sum c*pi + eps * KL(pi | P)
  enum class Method { line_search_2x2, dual_newton, dense_grid } method =
      Method::line_search_2x2;
  bool used_fallback = false;  // dual_newton: alternating warm start engaged
};

// 2x2 instances have one degree of freedom, t = pi_00 in
// [max(0, mu_0+nu_0-1), min(mu_0, nu_0)]. Minimizes the strictly convex
// scalar objective by golden-section search to interval width 1e-14, then
// polishes with a bisection on the stationarity condition
//   (c00 - c01 - c10 + c11) + eps * log(pi00 pi11 / (pi01 pi10)) = 0,
// whose left side is strictly increasing in t. A degenerate interval
// (numerically collapsed bracket) short-circuits to the unique feasible
// coupling.
OracleResult brute_force_2x2(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                             const CostMatrix& c, double eps);

// Third, even dumber 2x2 reference: evaluates the scalar objective on a
// lattice over the feasible interval and zooms three times. Accurate to
// ~1e-8 in t — enough to catch a wrong branch in either oracle above.
OracleResult grid_scan_2x2(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                           const CostMatrix& c, double eps);

struct DualStart {
  std::vector<double> u, v;  // sized n and m
};

// Damped Newton on the dual of the entropic problem with reference P:
// maximize g(u,v) = <mu,u> + <nu,v> - eps * sum_ij P_ij e^{(u_i+v_j-c_ij)/eps},
// Hessian assembled explicitly, reduced by pinning v_{m-1} = 0, solved with a
// dense Cholesky, Armijo backtracking. Converges to gradient sup-norm 1e-13.
// If Newton stalls it falls back to 10000 exact alternating dual updates and
// then polishes with Newton again (used_fallback reports this). Supports are
// capped at 16x16 (CapacityError beyond) — this is an oracle, not a solver.
OracleResult dual_newton(const CostMatrix& c, double eps, const DiscreteMeasure& mu,
                         const DiscreteMeasure& nu, const Coupling& P,
                         const DualStart* start = nullptr);

// Exact max cycle residual |sum log Z(z) - sum log Z(z_bar)|, Z = pi/ref,
// over every cycle of length 2..k_upto by full enumeration, written
// independently of check_invariance. Total tuple count is capped at 2e7
// (CapacityError beyond). Throws SupportViolation when a touched entry of
// pi or ref is zero.
double exhaustive_invariance(const Coupling& pi, const Coupling& ref, int k_upto);

}  // namespace eot
