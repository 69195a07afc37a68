#include "eot/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "eot/errors.hpp"

namespace eot {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Primal value sum c*pi + eps*KL(pi|P) with 0 log 0 := 0. Charging a cell
// that P does not charge costs +infinity.
double primal_value(const std::vector<double>& pi, const std::vector<double>& P,
                    const std::vector<double>& c, double eps) {
  double cost = 0, kl = 0;
  for (std::size_t k = 0; k < pi.size(); ++k) {
    if (pi[k] <= 0) continue;
    if (P[k] <= 0) return kInf;
    cost += c[k] * pi[k];
    kl += pi[k] * std::log(pi[k] / P[k]);
  }
  return cost + eps * kl;
}

// One-parameter family of feasible 2x2 couplings and its scalar objective.
struct Scalar2x2 {
  double mu0, nu0;
  double lo, hi;
  std::vector<double> c, P;
  double eps;

  std::vector<double> entries(double t) const {
    return {std::max(0.0, t), std::max(0.0, mu0 - t), std::max(0.0, nu0 - t),
            std::max(0.0, 1.0 - mu0 - nu0 + t)};
  }
  double f(double t) const { return primal_value(entries(t), P, c, eps); }
  // df/dt; -inf / +inf at the bracket endpoints, strictly increasing inside.
  double df(double t) const {
    const std::vector<double> e = entries(t);
    const double dc = c[0] - c[1] - c[2] + c[3];
    if (e[0] <= 0 || e[3] <= 0) return -kInf;
    if (e[1] <= 0 || e[2] <= 0) return kInf;
    return dc + eps * (std::log(e[0]) + std::log(e[3]) - std::log(e[1]) - std::log(e[2]));
  }
};

Scalar2x2 make_scalar(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                      const CostMatrix& c, double eps) {
  if (mu.size() != 2 || nu.size() != 2)
    throw ValidationError("2x2 oracle: marginals must each have two atoms");
  if (c.rows() != 2 || c.cols() != 2) throw ShapeMismatch("2x2 oracle: cost must be 2x2");
  if (!(eps > 0)) throw ValidationError("2x2 oracle: eps must be > 0");
  Scalar2x2 s;
  s.mu0 = mu.weight(0);
  s.nu0 = nu.weight(0);
  s.lo = std::max(0.0, s.mu0 + s.nu0 - 1.0);
  s.hi = std::min(s.mu0, s.nu0);
  s.c = c.values();
  s.P = {s.mu0 * s.nu0, s.mu0 * (1 - s.nu0), (1 - s.mu0) * s.nu0,
         (1 - s.mu0) * (1 - s.nu0)};
  s.eps = eps;
  return s;
}

OracleResult pack_2x2(const Scalar2x2& s, const DiscreteMeasure& mu,
                      const DiscreteMeasure& nu, double t, OracleResult::Method method) {
  const std::vector<double> e = s.entries(t);
  return {Coupling(mu.atoms(), nu.atoms(), e), primal_value(e, s.P, s.c, s.eps), method,
          false};
}

}  // namespace

OracleResult brute_force_2x2(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                             const CostMatrix& c, double eps) {
  const Scalar2x2 s = make_scalar(mu, nu, c, eps);
  if (s.hi - s.lo <= 1e-15)
    return pack_2x2(s, mu, nu, 0.5 * (s.lo + s.hi), OracleResult::Method::line_search_2x2);

  // Golden section to bracket width 1e-14.
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = s.lo, b = s.hi;
  double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
  double f1 = s.f(x1), f2 = s.f(x2);
  while (b - a > 1e-14) {
    if (f1 <= f2) {
      b = x2, x2 = x1, f2 = f1;
      x1 = b - gr * (b - a);
      f1 = s.f(x1);
    } else {
      a = x1, x1 = x2, f1 = f2;
      x2 = a + gr * (b - a);
      f2 = s.f(x2);
    }
  }

  // Polish on the stationarity condition: comparison noise near the flat
  // minimum stalls the section search around |t - t*| ~ 1e-8, while the
  // derivative still has a crisp sign there. Bisect it to the last bit.
  a = s.lo, b = s.hi;
  while (true) {
    const double mid = 0.5 * (a + b);
    if (mid <= a || mid >= b) break;
    (s.df(mid) < 0 ? a : b) = mid;
  }
  return pack_2x2(s, mu, nu, 0.5 * (a + b), OracleResult::Method::line_search_2x2);
}

OracleResult grid_scan_2x2(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                           const CostMatrix& c, double eps) {
  const Scalar2x2 s = make_scalar(mu, nu, c, eps);
  double a = s.lo, b = s.hi;
  double best_t = 0.5 * (a + b), best_f = kInf;
  for (int round = 0; round < 3; ++round) {
    const int N = 10000;
    for (int i = 0; i <= N; ++i) {
      const double t = a + (b - a) * i / N;
      const double v = s.f(t);
      if (v < best_f) best_f = v, best_t = t;
    }
    const double w = (b - a) * 2.0 / N;
    a = std::max(s.lo, best_t - w);
    b = std::min(s.hi, best_t + w);
  }
  return pack_2x2(s, mu, nu, best_t, OracleResult::Method::dense_grid);
}

namespace {

// Dense LL^T factorization in place; false when a pivot is not positive.
bool cholesky(std::vector<double>& A, std::size_t d) {
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      double sum = A[i * d + j];
      for (std::size_t k = 0; k < j; ++k) sum -= A[i * d + k] * A[j * d + k];
      if (i == j) {
        if (!(sum > 0)) return false;
        A[i * d + i] = std::sqrt(sum);
      } else {
        A[i * d + j] = sum / A[j * d + j];
      }
    }
  return true;
}

void cholesky_solve(const std::vector<double>& L, std::size_t d, std::vector<double>& x) {
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t k = 0; k < i; ++k) x[i] -= L[i * d + k] * x[k];
    x[i] /= L[i * d + i];
  }
  for (std::size_t ii = d; ii-- > 0;) {
    for (std::size_t k = ii + 1; k < d; ++k) x[ii] -= L[k * d + ii] * x[k];
    x[ii] /= L[ii * d + ii];
  }
}

double lse(const std::vector<double>& a) {
  double mx = -kInf;
  for (double x : a) mx = std::max(mx, x);
  if (mx == -kInf) return -kInf;
  double s = 0;
  for (double x : a) s += std::exp(x - mx);
  return mx + std::log(s);
}

}  // namespace

OracleResult dual_newton(const CostMatrix& c, double eps, const DiscreteMeasure& mu,
                         const DiscreteMeasure& nu, const Coupling& P,
                         const DualStart* start) {
  const std::size_t n = mu.size(), m = nu.size();
  if (n > 16 || m > 16) throw CapacityError("dual_newton: supports capped at 16x16");
  if (c.rows() != n || c.cols() != m || P.rows() != n || P.cols() != m)
    throw ShapeMismatch("dual_newton: shape mismatch");
  if (!(eps > 0)) throw ValidationError("dual_newton: eps must be > 0");
  for (std::size_t i = 0; i < n; ++i) {
    bool any = false;
    for (std::size_t j = 0; j < m; ++j) any = any || P.at(i, j) > 0;
    if (!any) throw ValidationError("dual_newton: reference charges nothing in a row");
  }
  for (std::size_t j = 0; j < m; ++j) {
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) any = any || P.at(i, j) > 0;
    if (!any) throw ValidationError("dual_newton: reference charges nothing in a column");
  }

  std::vector<double> u(n, 0.0), v(m, 0.0);
  if (start) {
    if (start->u.size() != n || start->v.size() != m)
      throw ShapeMismatch("dual_newton: start vector sizes");
    u = start->u;
    v = start->v;
    const double pin = v[m - 1];  // re-gauge so the pinned coordinate is 0
    for (double& ui : u) ui += pin;
    for (double& vj : v) vj -= pin;
  }

  std::vector<double> pi(n * m), gu(n), gv(m);
  auto compute_pi = [&](const std::vector<double>& uu, const std::vector<double>& vv) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        const double p = P.at(i, j);
        pi[i * m + j] = p > 0 ? p * std::exp((uu[i] + vv[j] - c.at(i, j)) / eps) : 0.0;
      }
  };
  auto dual_value = [&](const std::vector<double>& uu, const std::vector<double>& vv) {
    double lin = 0, mass = 0;
    for (std::size_t i = 0; i < n; ++i) lin += mu.weight(i) * uu[i];
    for (std::size_t j = 0; j < m; ++j) lin += nu.weight(j) * vv[j];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        const double p = P.at(i, j);
        if (p > 0) mass += p * std::exp((uu[i] + vv[j] - c.at(i, j)) / eps);
      }
    return lin - eps * mass;
  };
  auto gradient = [&]() {  // from the current pi buffer; returns sup norm
    double gn = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double row = 0;
      for (std::size_t j = 0; j < m; ++j) row += pi[i * m + j];
      gu[i] = mu.weight(i) - row;
      gn = std::max(gn, std::abs(gu[i]));
    }
    for (std::size_t j = 0; j < m; ++j) {
      double col = 0;
      for (std::size_t i = 0; i < n; ++i) col += pi[i * m + j];
      gv[j] = nu.weight(j) - col;
      gn = std::max(gn, std::abs(gv[j]));
    }
    return gn;
  };

  const std::size_t d = n + m - 1;  // v_{m-1} pinned to kill the shift gauge
  std::vector<double> H(d * d), rhs(d);

  auto newton_phase = [&](int max_it) -> bool {
    for (int it = 0; it < max_it; ++it) {
      compute_pi(u, v);
      if (gradient() <= 1e-13) return true;

      std::fill(H.begin(), H.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        double row = 0;
        for (std::size_t j = 0; j < m; ++j) {
          row += pi[i * m + j];
          if (j + 1 < m) {
            H[i * d + (n + j)] = pi[i * m + j] / eps;
            H[(n + j) * d + i] = pi[i * m + j] / eps;
          }
        }
        H[i * d + i] = row / eps;
      }
      for (std::size_t j = 0; j + 1 < m; ++j) {
        double col = 0;
        for (std::size_t i = 0; i < n; ++i) col += pi[i * m + j];
        H[(n + j) * d + (n + j)] = col / eps;
      }
      for (std::size_t i = 0; i < n; ++i) rhs[i] = gu[i];
      for (std::size_t j = 0; j + 1 < m; ++j) rhs[n + j] = gv[j];

      std::vector<double> L = H;
      if (!cholesky(L, d)) {
        double trace = 0;
        for (std::size_t k = 0; k < d; ++k) trace += H[k * d + k];
        L = H;
        const double ridge = 1e-12 * (1.0 + trace / static_cast<double>(d));
        for (std::size_t k = 0; k < d; ++k) L[k * d + k] += ridge;
        if (!cholesky(L, d)) return false;
      }
      std::vector<double> step = rhs;
      cholesky_solve(L, d, step);

      double slope = 0;
      for (std::size_t k = 0; k < d; ++k) slope += rhs[k] * step[k];
      const double g0 = dual_value(u, v);
      double alpha = 1.0;
      bool accepted = false;
      std::vector<double> ut(n), vt(m);
      for (int bt = 0; bt < 60; ++bt) {
        for (std::size_t i = 0; i < n; ++i) ut[i] = u[i] + alpha * step[i];
        for (std::size_t j = 0; j + 1 < m; ++j) vt[j] = v[j] + alpha * step[n + j];
        vt[m - 1] = v[m - 1];
        const double g1 = dual_value(ut, vt);
        if (std::isfinite(g1) && g1 >= g0 + 1e-4 * alpha * slope) {
          u = ut;
          v = vt;
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted) return false;
    }
    compute_pi(u, v);
    return gradient() <= 1e-13;
  };

  bool used_fallback = false;
  if (!newton_phase(200)) {
    used_fallback = true;
    // Exact alternating dual maximization, then hand back to Newton with a
    // point well inside its quadratic basin.
    std::vector<double> scratch;
    for (int it = 0; it < 10000; ++it) {
      for (std::size_t i = 0; i < n; ++i) {
        scratch.clear();
        for (std::size_t j = 0; j < m; ++j)
          if (P.at(i, j) > 0)
            scratch.push_back((v[j] - c.at(i, j)) / eps + std::log(P.at(i, j)));
        u[i] = eps * (std::log(mu.weight(i)) - lse(scratch));
      }
      for (std::size_t j = 0; j < m; ++j) {
        scratch.clear();
        for (std::size_t i = 0; i < n; ++i)
          if (P.at(i, j) > 0)
            scratch.push_back((u[i] - c.at(i, j)) / eps + std::log(P.at(i, j)));
        v[j] = eps * (std::log(nu.weight(j)) - lse(scratch));
      }
    }
    const double pin = v[m - 1];
    for (std::size_t i = 0; i < n; ++i) u[i] += pin;
    for (std::size_t j = 0; j < m; ++j) v[j] -= pin;
    if (!newton_phase(100))
      throw Error("dual_newton: gradient tolerance 1e-13 unreachable");
  }

  // One exact row rebalance makes the row marginals exact to roundoff; the
  // column error stays at the gradient tolerance, so feasibility and the
  // total-mass invariant both hold with headroom.
  {
    std::vector<double> scratch;
    for (std::size_t i = 0; i < n; ++i) {
      scratch.clear();
      for (std::size_t j = 0; j < m; ++j)
        if (P.at(i, j) > 0)
          scratch.push_back((v[j] - c.at(i, j)) / eps + std::log(P.at(i, j)));
      u[i] = eps * (std::log(mu.weight(i)) - lse(scratch));
    }
    compute_pi(u, v);
  }

  std::vector<double> pvals(n * m), cvals(n * m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      pvals[i * m + j] = P.at(i, j);
      cvals[i * m + j] = c.at(i, j);
    }
  return {Coupling(mu.atoms(), nu.atoms(), pi), primal_value(pi, pvals, cvals, eps),
          OracleResult::Method::dual_newton, used_fallback};
}

double exhaustive_invariance(const Coupling& pi, const Coupling& ref, int k_upto) {
  if (ref.rows() != pi.rows() || ref.cols() != pi.cols())
    throw ShapeMismatch("exhaustive_invariance: shape mismatch");
  if (k_upto < 2) throw ValidationError("exhaustive_invariance: k_upto must be >= 2");
  const std::size_t n = pi.rows(), m = pi.cols();
  const double cells = static_cast<double>(n) * static_cast<double>(m);
  double total = 0;
  for (int k = 2; k <= k_upto; ++k) total += std::pow(cells, k);
  if (total > 2e7)
    throw CapacityError("exhaustive_invariance: " + std::to_string(total) +
                        " cycle evaluations exceed the 2e7 cap");

  std::vector<double> lz(n * m);
  std::vector<char> ok(n * m);
  for (std::size_t k = 0; k < n * m; ++k) {
    ok[k] = pi.mass()[k] > 0 && ref.mass()[k] > 0;
    lz[k] = ok[k] ? std::log(pi.mass()[k]) - std::log(ref.mass()[k]) : 0.0;
  }

  double worst = 0;
  std::vector<std::size_t> cell(static_cast<std::size_t>(k_upto));
  for (int k = 2; k <= k_upto; ++k) {
    const auto rec = [&](const auto& self, int depth) -> void {
      if (depth == k) {
        double straight = 0, barred = 0;
        for (int t = 0; t < k; ++t) {
          const std::size_t a = cell[t];
          const std::size_t b = (cell[t] / m) * m + cell[(t + 1) % k] % m;
          if (!ok[a] || !ok[b])
            throw SupportViolation("exhaustive_invariance: cycle touches a zero entry");
          straight += lz[a];
          barred += lz[b];
        }
        worst = std::max(worst, std::abs(straight - barred));
        return;
      }
      for (std::size_t s = 0; s < n * m; ++s) {
        cell[depth] = s;
        self(self, depth + 1);
      }
    };
    rec(rec, 0);
  }
  return worst;
}

}  // namespace eot
