#include "eot/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "eot/invariance.hpp"

namespace eot {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> log_of(const std::vector<double>& w) {
  std::vector<double> lw(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) lw[i] = std::log(w[i]);
  return lw;
}

}  // namespace

SolveResult sinkhorn(const GibbsKernel& kernel, const DiscreteMeasure& mu,
                     const DiscreteMeasure& nu, const SolveConfig& config) {
  const std::size_t n = mu.size(), m = nu.size();
  if (kernel.rows() != n || kernel.cols() != m)
    throw ShapeMismatch("sinkhorn: kernel/marginal shape mismatch");
  if (!(config.tol > 0) || config.max_iter < 1)
    throw ValidationError("sinkhorn: tol must be > 0 and max_iter >= 1");
  if (config.init_log_psi && config.init_log_psi->size() != m)
    throw ShapeMismatch("sinkhorn: init_log_psi size mismatch");

  const std::vector<double>& ld = kernel.log_density_values();
  const std::vector<double> log_mu = log_of(mu.weights());
  const std::vector<double> log_nu = log_of(nu.weights());

  std::vector<double> log_phi(n, 0.0);
  std::vector<double> log_psi = config.init_log_psi ? *config.init_log_psi
                                                    : std::vector<double>(m, 0.0);
  for (double v : log_psi)
    if (!std::isfinite(v)) throw ValidationError("sinkhorn: non-finite init_log_psi");

  std::optional<Coupling> P;  // built on demand; only iterate recording needs it
  auto build_coupling = [&]() {
    std::vector<double> mass(n * m);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j)
        mass[i * m + j] =
            std::exp(log_phi[i] + ld[i * m + j] + log_psi[j] + log_mu[i] + log_nu[j]);
    return Coupling(mu.atoms(), nu.atoms(), std::move(mass));
  };

  SolveReport report;
  std::vector<double> col_lse(m);
  double err = kInf;
  for (long it = 1; it <= config.max_iter; ++it) {
    report.iterations = it;

    // Row update: log_phi_i <- -logsumexp_j(ld_ij + log_nu_j + log_psi_j);
    // afterwards every row sum equals mu_i exactly.
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = &ld[i * m];
      double hi = -kInf;
      for (std::size_t j = 0; j < m; ++j)
        hi = std::max(hi, row[j] + log_nu[j] + log_psi[j]);
      double s = 0;
      for (std::size_t j = 0; j < m; ++j)
        s += std::exp(row[j] + log_nu[j] + log_psi[j] - hi);
      log_phi[i] = -(hi + std::log(s));
    }

    // Column log-sums serve double duty: the convergence check against nu and
    // (negated) the next psi update.
    for (std::size_t j = 0; j < m; ++j) col_lse[j] = -kInf;
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = &ld[i * m];
      const double a = log_mu[i] + log_phi[i];
      for (std::size_t j = 0; j < m; ++j)
        col_lse[j] = std::max(col_lse[j], row[j] + a);
    }
    std::vector<double> acc(m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = &ld[i * m];
      const double a = log_mu[i] + log_phi[i];
      for (std::size_t j = 0; j < m; ++j) acc[j] += std::exp(row[j] + a - col_lse[j]);
    }
    err = 0;
    for (std::size_t j = 0; j < m; ++j) {
      col_lse[j] += std::log(acc[j]);
      const double col_j = std::exp(log_nu[j] + log_psi[j] + col_lse[j]);
      err = std::max(err, std::abs(col_j - nu.weight(j)));
    }

    if (config.record_iterates) {
      if (!P) P.emplace(product_measure(mu, nu));
      const Coupling iterate = build_coupling();
      const InvarianceReport inv = check_invariance(iterate, kernel, *P, 2);
      report.iterate_invariance_residuals.push_back(inv.max_residual);
      report.iterate_marginal_errors.push_back(err);
    }
    if (err <= config.tol) {
      report.converged = true;
      break;
    }
    for (std::size_t j = 0; j < m; ++j) log_psi[j] = -col_lse[j];
  }

  Coupling pi = build_coupling();
  report.marginal_error = err;
  {
    const auto rs = pi.row_sums();
    double re = 0;
    for (std::size_t i = 0; i < n; ++i) re = std::max(re, std::abs(rs[i] - mu.weight(i)));
    report.marginal_error_row = re;
  }
  // Objectives through the factorized density: log(dpi/dR) = log_phi (+) log_psi.
  {
    const auto rs = pi.row_sums();
    const auto cs = pi.col_sums();
    double kl = 0;
    for (std::size_t i = 0; i < n; ++i) kl += log_phi[i] * rs[i];
    for (std::size_t j = 0; j < m; ++j) kl += log_psi[j] * cs[j];
    report.objective_kl = kl;
    report.objective_eot = kernel.epsilon() * (kl + kernel.log_norm());
  }
  return SolveResult{std::move(pi), Potentials{std::move(log_phi), std::move(log_psi)},
                     std::move(report)};
}

double schrodinger_residual(const Potentials& pot, const GibbsKernel& kernel,
                            const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  const std::size_t n = mu.size(), m = nu.size();
  if (kernel.rows() != n || kernel.cols() != m || pot.log_phi.size() != n ||
      pot.log_psi.size() != m)
    throw ShapeMismatch("schrodinger_residual: shape mismatch");
  const std::vector<double>& ld = kernel.log_density_values();
  double worst = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double hi = -kInf;
    for (std::size_t j = 0; j < m; ++j)
      hi = std::max(hi, ld[i * m + j] + pot.log_psi[j] + std::log(nu.weight(j)));
    double s = 0;
    for (std::size_t j = 0; j < m; ++j)
      s += std::exp(ld[i * m + j] + pot.log_psi[j] + std::log(nu.weight(j)) - hi);
    worst = std::max(worst, std::abs(hi + std::log(s) + pot.log_phi[i]));
  }
  for (std::size_t j = 0; j < m; ++j) {
    double hi = -kInf;
    for (std::size_t i = 0; i < n; ++i)
      hi = std::max(hi, ld[i * m + j] + pot.log_phi[i] + std::log(mu.weight(i)));
    double s = 0;
    for (std::size_t i = 0; i < n; ++i)
      s += std::exp(ld[i * m + j] + pot.log_phi[i] + std::log(mu.weight(i)) - hi);
    worst = std::max(worst, std::abs(hi + std::log(s) + pot.log_psi[j]));
  }
  return worst;
}

Objective objective(const Coupling& pi, const CostMatrix& c, double eps, const Coupling& P) {
  const std::size_t n = pi.rows(), m = pi.cols();
  if (c.rows() != n || c.cols() != m || P.rows() != n || P.cols() != m)
    throw ShapeMismatch("objective: shape mismatch");
  if (!(eps > 0)) throw ValidationError("objective: eps must be > 0");

  // log a = -log sum exp(-c/eps) dP over the cells P charges.
  double hi = -kInf;
  for (std::size_t k = 0; k < n * m; ++k)
    if (P.mass()[k] > 0)
      hi = std::max(hi, -c.values()[k] / eps + std::log(P.mass()[k]));
  double s = 0;
  for (std::size_t k = 0; k < n * m; ++k)
    if (P.mass()[k] > 0)
      s += std::exp(-c.values()[k] / eps + std::log(P.mass()[k]) - hi);
  const double log_norm = -(hi + std::log(s));

  double cost = 0, h_p = 0, h_r = 0;
  bool infinite = false;
  for (std::size_t k = 0; k < n * m; ++k) {
    const double p = pi.mass()[k];
    if (p == 0.0) continue;  // 0 log 0 := 0
    if (P.mass()[k] == 0.0) {
      infinite = true;  // pi is not absolutely continuous w.r.t. P
      break;
    }
    const double lp = std::log(p), lP = std::log(P.mass()[k]);
    cost += c.values()[k] * p;
    h_p += p * (lp - lP);
    h_r += p * (lp - (-c.values()[k] / eps + log_norm + lP));
  }
  if (infinite) return Objective{kInf, kInf};

  const Objective out{cost + eps * h_p, h_r};
  // Consistency tripwire: the two routes to the value must agree.
  const double via_kernel = eps * (out.kl_vs_R + log_norm);
  if (std::abs(out.eot - via_kernel) > 1e-6 * (1.0 + std::abs(out.eot)))
    throw Error("objective: internal relation eot = eps*(kl + log_norm) violated");
  return out;
}

bool finiteness_check(const CostMatrix& c, const Coupling& P) {
  if (c.rows() != P.rows() || c.cols() != P.cols())
    throw ShapeMismatch("finiteness_check: shape mismatch");
  for (std::size_t k = 0; k < c.values().size(); ++k)
    if (P.mass()[k] > 0 && !std::isfinite(c.values()[k])) return false;
  return true;
}

}  // namespace eot
