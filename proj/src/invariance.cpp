#include "eot/invariance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace eot {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_cycle_indices(const Cycle& cyc, std::size_t n, std::size_t m) {
  if (cyc.pairs.empty()) throw ValidationError("cycle: empty");
  for (const auto& [i, j] : cyc.pairs)
    if (i >= n || j >= m) throw ValidationError("cycle: index out of range");
}

// log(pi_ij / ref_ij) with the support-violation contract.
struct LogRatio {
  const Coupling& pi;
  const std::vector<double>& log_ref;  // log of the reference, -inf allowed
  std::size_t m;
  double operator()(std::size_t i, std::size_t j) const {
    const double p = pi.at(i, j);
    if (p <= 0.0 || !std::isfinite(log_ref[i * m + j]))
      throw SupportViolation("cycle touches a zero entry (support violation)");
    return std::log(p) - log_ref[i * m + j];
  }
};

double tuple_residual(const LogRatio& lz,
                      const std::vector<std::pair<std::size_t, std::size_t>>& z) {
  const std::size_t k = z.size();
  double straight = 0, barred = 0;
  for (std::size_t t = 0; t < k; ++t) {
    straight += lz(z[t].first, z[t].second);
    barred += lz(z[t].first, z[(t + 1) % k].second);
  }
  return std::abs(straight - barred);
}

// Uniform integer in [0, bound) by rejection on the top of the 64-bit range;
// identical output on every platform, unlike std::uniform_int_distribution.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

std::vector<double> log_entries(const Coupling& R) {
  std::vector<double> lr(R.mass().size());
  for (std::size_t k = 0; k < lr.size(); ++k)
    lr[k] = R.mass()[k] > 0 ? std::log(R.mass()[k]) : -kInf;
  return lr;
}

std::vector<double> log_entries(const GibbsKernel& kernel, const Coupling& P) {
  std::vector<double> lr(P.mass().size());
  for (std::size_t k = 0; k < lr.size(); ++k)
    lr[k] = P.mass()[k] > 0 ? kernel.log_density_values()[k] + std::log(P.mass()[k])
                            : -kInf;
  return lr;
}

InvarianceReport check_invariance_impl(const Coupling& pi,
                                       const std::vector<double>& log_ref, int k_max,
                                       long budget, std::uint64_t seed) {
  if (k_max < 2) throw ValidationError("check_invariance: k_max must be >= 2");
  if (budget < 1) throw ValidationError("check_invariance: budget must be >= 1");
  const std::size_t n = pi.rows(), m = pi.cols();
  const LogRatio lz{pi, log_ref, m};
  const double cells = static_cast<double>(n) * static_cast<double>(m);

  double cycle_count = 0;  // sum over k of (n*m)^k / k, rotation classes
  for (int k = 2; k <= k_max; ++k) cycle_count += std::pow(cells, k) / k;

  InvarianceReport rep;
  rep.k_max = k_max;
  auto consider = [&](const std::vector<std::pair<std::size_t, std::size_t>>& z) {
    const double r = tuple_residual(lz, z);
    ++rep.cycles_checked;
    if (r > rep.max_residual) {
      rep.max_residual = r;
      rep.worst_cycle.pairs = z;
    }
  };

  if (cycle_count <= static_cast<double>(budget)) {
    rep.mode = InvarianceReport::Mode::exhaustive;
    std::vector<std::pair<std::size_t, std::size_t>> z;
    for (int k = 2; k <= k_max; ++k) {
      z.assign(k, {0, 0});
      std::vector<std::size_t> odo(k, 0);  // each slot enumerates n*m cells
      while (true) {
        for (int t = 0; t < k; ++t) z[t] = {odo[t] / m, odo[t] % m};
        consider(z);
        int t = k - 1;
        while (t >= 0 && ++odo[t] == n * m) odo[t--] = 0;
        if (t < 0) break;
      }
    }
  } else {
    rep.mode = InvarianceReport::Mode::sampled;
    std::mt19937_64 rng(seed);
    std::vector<std::pair<std::size_t, std::size_t>> z;
    for (long draw = 0; draw < budget; ++draw) {
      const int k = 2 + static_cast<int>(bounded(rng, static_cast<std::uint64_t>(k_max - 1)));
      z.resize(k);
      for (int t = 0; t < k; ++t)
        z[t] = {static_cast<std::size_t>(bounded(rng, n)),
                static_cast<std::size_t>(bounded(rng, m))};
      consider(z);
    }
  }
  return rep;
}

double rect_mass(const Coupling& pi, const std::vector<std::size_t>& rows,
                 const std::vector<std::size_t>& cols) {
  if (rows.empty() || cols.empty()) throw ValidationError("rectangle: empty index set");
  double s = 0;
  for (std::size_t i : rows) {
    if (i >= pi.rows()) throw ValidationError("rectangle: row index out of range");
    for (std::size_t j : cols) {
      if (j >= pi.cols()) throw ValidationError("rectangle: col index out of range");
      s += pi.at(i, j);
    }
  }
  return s;
}

}  // namespace

double cycle_residual_eot(const Coupling& pi, const CostMatrix& c, double eps,
                          const Coupling& P, const Cycle& cyc) {
  const std::size_t n = pi.rows(), m = pi.cols();
  if (c.rows() != n || c.cols() != m || P.rows() != n || P.cols() != m)
    throw ShapeMismatch("cycle_residual_eot: shape mismatch");
  if (!(eps > 0)) throw ValidationError("cycle_residual_eot: eps must be > 0");
  check_cycle_indices(cyc, n, m);

  const std::vector<double> log_p = log_entries(P);
  const LogRatio lz{pi, log_p, m};
  const std::size_t k = cyc.pairs.size();
  double straight = 0, barred = 0, cost_gap = 0;
  for (std::size_t t = 0; t < k; ++t) {
    const auto [i, j] = cyc.pairs[t];
    const std::size_t jb = cyc.pairs[(t + 1) % k].second;
    straight += lz(i, j);
    barred += lz(i, jb);
    cost_gap += c.at(i, j) - c.at(i, jb);
  }
  return std::abs(straight - barred + cost_gap / eps);
}

double cycle_residual_general(const Coupling& pi, const Coupling& R, const Cycle& cyc) {
  if (R.rows() != pi.rows() || R.cols() != pi.cols())
    throw ShapeMismatch("cycle_residual_general: shape mismatch");
  check_cycle_indices(cyc, pi.rows(), pi.cols());
  const std::vector<double> log_r = log_entries(R);
  return tuple_residual(LogRatio{pi, log_r, pi.cols()}, cyc.pairs);
}

InvarianceReport check_invariance(const Coupling& pi, const Coupling& R, int k_max,
                                  long budget, std::uint64_t seed) {
  if (R.rows() != pi.rows() || R.cols() != pi.cols())
    throw ShapeMismatch("check_invariance: shape mismatch");
  return check_invariance_impl(pi, log_entries(R), k_max, budget, seed);
}

InvarianceReport check_invariance(const Coupling& pi, const GibbsKernel& kernel,
                                  const Coupling& P, int k_max, long budget,
                                  std::uint64_t seed) {
  if (kernel.rows() != pi.rows() || kernel.cols() != pi.cols() ||
      P.rows() != pi.rows() || P.cols() != pi.cols())
    throw ShapeMismatch("check_invariance: shape mismatch");
  return check_invariance_impl(pi, log_entries(kernel, P), k_max, budget, seed);
}

Potentials factorize(const Coupling& pi, const Coupling& R) {
  const std::size_t n = pi.rows(), m = pi.cols();
  if (R.rows() != n || R.cols() != m) throw ShapeMismatch("factorize: shape mismatch");
  std::vector<double> log_z(n * m);
  for (std::size_t k = 0; k < n * m; ++k) {
    if (!(pi.mass()[k] > 0) || !(R.mass()[k] > 0))
      throw SupportViolation("factorize: zero entry (support violation)");
    log_z[k] = std::log(pi.mass()[k]) - std::log(R.mass()[k]);
  }
  // Hub = argmax pi entry.
  std::size_t hub = 0;
  for (std::size_t k = 1; k < n * m; ++k)
    if (pi.mass()[k] > pi.mass()[hub]) hub = k;
  const std::size_t hi = hub / m, hj = hub % m;

  Potentials pot;
  pot.log_phi.assign(n, 0.0);
  pot.log_psi.assign(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) pot.log_psi[j] = log_z[hi * m + j];  // log_phi[hi] = 0
  for (std::size_t i = 0; i < n; ++i)
    pot.log_phi[i] = log_z[i * m + hj] - pot.log_psi[hj];

  double worst = 0;
  std::size_t wi = 0, wj = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const double gap = std::abs(log_z[i * m + j] - pot.log_phi[i] - pot.log_psi[j]);
      if (gap > worst) {
        worst = gap;
        wi = i;
        wj = j;
      }
    }
  if (worst > 1e-8)
    throw NotInvariant("factorize: density is not cyclically invariant (worst cell (" +
                           std::to_string(wi) + "," + std::to_string(wj) + "), gap " +
                           std::to_string(worst) + ")",
                       wi, wj, worst);
  return pot;
}

double rectangle_identity_product(const Coupling& pi, const Rectangle& F1G1,
                                  const Rectangle& F2G2) {
  const double m11 = rect_mass(pi, F1G1.rows, F1G1.cols);
  const double m22 = rect_mass(pi, F2G2.rows, F2G2.cols);
  const double m12 = rect_mass(pi, F1G1.rows, F2G2.cols);
  const double m21 = rect_mass(pi, F2G2.rows, F1G1.cols);
  if (m11 <= 0 || m22 <= 0 || m12 <= 0 || m21 <= 0)
    throw SupportViolation("rectangle_identity_product: zero rectangle mass");
  return std::abs(std::log(m11 * m22) - std::log(m12 * m21));
}

RectangleCheck rectangle_inequality(const Coupling& pi, const Coupling& R,
                                    const Coupling& P, const std::vector<Rectangle>& rects) {
  if (rects.empty()) throw ValidationError("rectangle_inequality: no rectangles");
  if (R.rows() != pi.rows() || R.cols() != pi.cols() || P.rows() != pi.rows() ||
      P.cols() != pi.cols())
    throw ShapeMismatch("rectangle_inequality: shape mismatch");
  factorize(pi, R);  // precondition: pi factorizable w.r.t. R; errors propagate

  const std::size_t k = rects.size();
  double log_lhs = 0, log_rhs_prod = 0, alpha = 0, alpha_bar = 0;
  for (std::size_t t = 0; t < k; ++t) {
    const Rectangle& A = rects[t];
    const std::vector<std::size_t>& G_next = rects[(t + 1) % k].cols;
    const double ma = rect_mass(pi, A.rows, A.cols);
    const double mb = rect_mass(pi, A.rows, G_next);
    if (ma <= 0 || mb <= 0)
      throw SupportViolation("rectangle_inequality: zero rectangle mass");
    log_lhs += std::log(ma);
    log_rhs_prod += std::log(mb);
    for (std::size_t i : A.rows) {
      for (std::size_t j : A.cols)
        alpha = std::max(alpha, R.at(i, j) / P.at(i, j));
      for (std::size_t j : G_next)
        alpha_bar = std::max(alpha_bar, P.at(i, j) / R.at(i, j));
    }
  }
  RectangleCheck out;
  out.lhs = std::exp(log_lhs);
  out.rhs = std::exp(static_cast<double>(k) * std::log(alpha * alpha_bar) + log_rhs_prod);
  out.holds = out.lhs <= out.rhs * (1.0 + 1e-12);
  return out;
}

}  // namespace eot
