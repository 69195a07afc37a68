#pragma once

// Log-domain Sinkhorn / iterative proportional fitting. Computes the unique
// cyclically invariant coupling with the prescribed marginals, and evaluates
// objectives and the Schrödinger-system residual.

#include <cstddef>
#include <optional>
#include <vector>

#include "eot/cost.hpp"
#include "eot/measure.hpp"
#include "eot/potentials.hpp"

namespace eot {

struct SolveConfig {
  double tol = 1e-12;      // sup-norm marginal error at convergence
  long max_iter = 100000;
  bool record_iterates = false;
  // Non-default start for the gauge-uniqueness test; log_psi starts at zero
  // otherwise so runs are deterministic.
  std::optional<std::vector<double>> init_log_psi;
};

struct SolveReport {
  long iterations = 0;
  double marginal_error = 0;      // column sup-norm error at the accepted iterate
  double marginal_error_row = 0;  // row-side error, reported alongside
  bool converged = false;
  double objective_eot = 0;  // transport cost + eps * H(pi|P)
  double objective_kl = 0;   // H(pi|R)
  // Filled when record_iterates is set: per-iteration exhaustive k<=2 cycle
  // residual w.r.t. R, and the per-iteration marginal error.
  std::vector<double> iterate_invariance_residuals;
  std::vector<double> iterate_marginal_errors;
};

struct SolveResult {
  Coupling coupling;
  Potentials potentials;
  SolveReport report;
};

// Alternating log-domain updates until the column marginal (measured after a
// row update) matches nu in sup norm within tol. Non-convergence is data, not
// an error: the report carries converged=false and the last iterate.
SolveResult sinkhorn(const GibbsKernel& kernel, const DiscreteMeasure& mu,
                     const DiscreteMeasure& nu, const SolveConfig& config = {});

// Max over rows and columns of the log-domain fixed-point equation residual,
//   row_i: | logsumexp_j(log_density_ij + log_psi_j + log nu_j) + log_phi_i |,
// using the reciprocal convention that maps the classical phi^{-1} to
// -log_phi. Zero exactly at a Schrödinger system solution.
double schrodinger_residual(const Potentials& pot, const GibbsKernel& kernel,
                            const DiscreteMeasure& mu, const DiscreteMeasure& nu);

struct Objective {
  double eot;      // sum c*pi + eps * H(pi|P); +inf if pi is not << P
  double kl_vs_R;  // H(pi|R) computed through the kernel
};

// Evaluates both objectives and cross-checks the internal relation
// eot = eps * (kl_vs_R + log_norm) as a consistency tripwire.
Objective objective(const Coupling& pi, const CostMatrix& c, double eps, const Coupling& P);

// True iff the discrete instance is in the finite-cost regime, i.e. every
// cost entry is finite — always true for a valid CostMatrix. Experiments use
// the analytic flag on the continuum law, not this computation, to mark the
// infinite-value regime.
bool finiteness_check(const CostMatrix& c, const Coupling& P);

}  // namespace eot
