#pragma once

// Executable cyclical invariance: cycle residuals, exhaustive/sampled cycle
// checking, rectangle identities and inequalities, and extraction of the
// potential factorization from an invariant density.
//
// Notation: a cycle is a tuple z = ((x_1,y_1),...,(x_k,y_k)) of support index
// pairs; its "barred" companion rotates the column indices one step,
// z̄_i = (x_i, y_{i+1 mod k}). Residuals compare log-products of densities
// along z and z̄ — log domain throughout, since the products span many orders
// of magnitude for long cycles.

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "eot/cost.hpp"
#include "eot/measure.hpp"
#include "eot/potentials.hpp"

namespace eot {

struct Cycle {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (row, col), k >= 1
};

struct InvarianceReport {
  int k_max = 0;
  long cycles_checked = 0;
  double max_residual = 0;
  Cycle worst_cycle;
  enum class Mode { exhaustive, sampled } mode = Mode::exhaustive;
};

struct Rectangle {
  std::vector<std::size_t> rows;  // index set F
  std::vector<std::size_t> cols;  // index set G
};

// |sum_i log(pi/P)(z_i) - sum_i log(pi/P)(z̄_i) + (1/eps)(sum_i c(z_i) - sum_i c(z̄_i))|.
// Zero for every coupling when k = 1. Throws SupportViolation if pi vanishes
// on a touched cell.
double cycle_residual_eot(const Coupling& pi, const CostMatrix& c, double eps,
                          const Coupling& P, const Cycle& cyc);

// |sum_i log(pi/R)(z_i) - sum_i log(pi/R)(z̄_i)| for a general reference R.
double cycle_residual_general(const Coupling& pi, const Coupling& R, const Cycle& cyc);

inline constexpr long kDefaultCycleBudget = 2'000'000;

// Checks all cycles with 2 <= k <= k_max when sum_k (n*m)^k / k fits the
// budget; otherwise samples uniformly random cycles up to the budget with the
// given seed (hand-rolled bounded draws, bit-reproducible across platforms).
// The reference is either an explicit coupling R or a kernel with its base P.
InvarianceReport check_invariance(const Coupling& pi, const Coupling& R, int k_max,
                                  long budget = kDefaultCycleBudget,
                                  std::uint64_t seed = 0);
InvarianceReport check_invariance(const Coupling& pi, const GibbsKernel& kernel,
                                  const Coupling& P, int k_max,
                                  long budget = kDefaultCycleBudget,
                                  std::uint64_t seed = 0);

// Recovers log potentials from an invariant density Z = pi/R through a hub
// row/column: the hub is the argmax entry of pi (positivity is all the
// construction needs; the argmax maximizes numerical headroom). Verifies
// log Z_ij = log_phi_i + log_psi_j within 1e-8 everywhere and throws
// NotInvariant with the worst cell otherwise.
Potentials factorize(const Coupling& pi, const Coupling& R);

// |log[pi(F1xG1) pi(F2xG2)] - log[pi(F1xG2) pi(F2xG1)]|. Tiny only when pi is
// cyclically invariant w.r.t. R = P (zero cost); reported, not asserted,
// otherwise.
double rectangle_identity_product(const Coupling& pi, const Rectangle& F1G1,
                                  const Rectangle& F2G2);

struct RectangleCheck {
  double lhs = 0, rhs = 0;
  bool holds = false;
};

// With A_i = F_i x G_i and Ā_i = F_i x G_{i+1} (cyclically):
//   prod_i pi(A_i) <= (alpha*alpha_bar)^k prod_i pi(Ā_i),
// where alpha = max_i max_{A_i} R/P and alpha_bar = max_i max_{Ā_i} P/R.
// Requires pi to factorize w.r.t. R (checked; errors propagate).
RectangleCheck rectangle_inequality(const Coupling& pi, const Coupling& R,
                                    const Coupling& P, const std::vector<Rectangle>& rects);

}  // namespace eot
