#include "eot/measure.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>

#include "transport_simplex.hpp"

namespace eot {

namespace {

constexpr double kMergeTol = 1e-12;   // sup-norm atom merge radius
constexpr double kMassTol = 1e-12;    // |total mass - 1| bound
constexpr std::size_t kExactW1Cap = 2048;

void require_finite(const Point& p) {
  for (double c : p.coords)
    if (!std::isfinite(c)) throw ValidationError("point has non-finite coordinate");
}

}  // namespace

double sup_distance(const Point& a, const Point& b) {
  if (a.dim() != b.dim()) throw ShapeMismatch("point dimension mismatch");
  double d = 0;
  for (std::size_t i = 0; i < a.dim(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

double euclidean_distance(const Point& a, const Point& b) {
  if (a.dim() != b.dim()) throw ShapeMismatch("point dimension mismatch");
  double s = 0;
  for (std::size_t i = 0; i < a.dim(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

DiscreteMeasure::DiscreteMeasure(std::vector<Point> atoms, std::vector<double> weights) {
  if (atoms.size() != weights.size())
    throw ShapeMismatch("measure: atom/weight count mismatch");
  if (atoms.empty()) throw ValidationError("measure: empty support");
  const std::size_t d = atoms[0].dim();
  for (const auto& a : atoms) {
    if (a.dim() != d) throw ShapeMismatch("measure: mixed atom dimensions");
    require_finite(a);
  }
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0) throw ValidationError("measure: invalid weight");
  }
  // Strip zero-weight atoms, then merge duplicates within the merge radius.
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    if (weights[i] == 0.0) continue;
    bool merged = false;
    for (std::size_t k = 0; k < atoms_.size(); ++k) {
      if (sup_distance(atoms_[k], atoms[i]) < kMergeTol) {
        weights_[k] += weights[i];
        merged = true;
        break;
      }
    }
    if (!merged) {
      atoms_.push_back(std::move(atoms[i]));
      weights_.push_back(weights[i]);
    }
  }
  if (atoms_.empty()) throw ValidationError("measure: all weights zero");
  double total = 0;
  for (double w : weights_) total += w;
  if (std::abs(total - 1.0) > kMassTol)
    throw ValidationError("measure: weights must sum to 1 within 1e-12");
}

Coupling::Coupling(std::vector<Point> row_support, std::vector<Point> col_support,
                   std::vector<double> mass)
    : rows_(std::move(row_support)), cols_(std::move(col_support)), mass_(std::move(mass)) {
  n_ = rows_.size();
  m_ = cols_.size();
  if (n_ == 0 || m_ == 0) throw ValidationError("coupling: empty support");
  if (mass_.size() != n_ * m_) throw ShapeMismatch("coupling: mass shape mismatch");
  for (const auto& p : rows_) require_finite(p);
  for (const auto& p : cols_) require_finite(p);
  double total = 0, comp = 0;  // Kahan keeps the 1e-12 check honest at 1024^2
  for (double v : mass_) {
    if (!std::isfinite(v) || v < 0) throw ValidationError("coupling: invalid entry");
    const double y = v - comp, t = total + y;
    comp = (t - total) - y;
    total = t;
  }
  if (std::abs(total - 1.0) > kMassTol)
    throw ValidationError("coupling: total mass must be 1 within 1e-12");
}

std::vector<double> Coupling::row_sums() const {
  std::vector<double> r(n_, 0.0);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < m_; ++j) r[i] += mass_[i * m_ + j];
  return r;
}

std::vector<double> Coupling::col_sums() const {
  std::vector<double> c(m_, 0.0);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < m_; ++j) c[j] += mass_[i * m_ + j];
  return c;
}

double Coupling::total_mass() const {
  double t = 0;
  for (double v : mass_) t += v;
  return t;
}

Coupling product_measure(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  std::vector<double> mass(mu.size() * nu.size());
  for (std::size_t i = 0; i < mu.size(); ++i)
    for (std::size_t j = 0; j < nu.size(); ++j)
      mass[i * nu.size() + j] = mu.weight(i) * nu.weight(j);
  return Coupling(mu.atoms(), nu.atoms(), std::move(mass));
}

std::pair<DiscreteMeasure, DiscreteMeasure> marginals(const Coupling& pi) {
  return {DiscreteMeasure(pi.row_support(), pi.row_sums()),
          DiscreteMeasure(pi.col_support(), pi.col_sums())};
}

double inverse_cauchy_cdf(double p) {
  return std::tan(std::numbers::pi * (p - 0.5));
}

double inverse_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ValidationError("inverse_normal_cdf: p outside (0,1)");
  // Acklam's rational approximation (~1e-9), then two Halley refinements
  // through erfc push the relative error below 1e-14.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  } else if (p <= 1 - plow) {
    const double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  } else {
    const double q = std::sqrt(-2 * std::log(1 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  for (int pass = 0; pass < 2; ++pass) {
    const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
    const double u = e * std::sqrt(2 * std::numbers::pi) * std::exp(x * x / 2);
    x = x - u / (1 + x * u / 2);
  }
  return x;
}

DiscreteMeasure quantize(const Law& law, std::size_t n) {
  if (n == 0) throw ValidationError("quantize: n must be positive");
  auto icdf = [&](double p) -> double {
    switch (law.kind) {
      case Law::Kind::uniform:
        if (!(law.p2 > law.p1)) throw ValidationError("quantize: uniform needs b > a");
        return law.p1 + (law.p2 - law.p1) * p;
      case Law::Kind::gaussian:
        if (!(law.p2 > 0)) throw ValidationError("quantize: gaussian needs s > 0");
        return law.p1 + law.p2 * inverse_normal_cdf(p);
      case Law::Kind::cauchy:
        if (!(law.p2 > 0)) throw ValidationError("quantize: cauchy needs scale > 0");
        return law.p1 + law.p2 * inverse_cauchy_cdf(p);
    }
    throw ValidationError("quantize: unknown law");
  };
  std::vector<Point> atoms;
  std::vector<double> weights(n, 1.0 / static_cast<double>(n));
  atoms.reserve(n);
  for (std::size_t i = 1; i <= n; ++i)
    atoms.push_back(Point{icdf((static_cast<double>(i) - 0.5) / static_cast<double>(n))});
  return DiscreteMeasure(std::move(atoms), std::move(weights));
}

DiscreteMeasure sample_iid(const Law& law, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ValidationError("sample_iid: n must be positive");
  std::mt19937_64 rng(seed);
  auto unit = [&]() {  // uniform in (0,1), clamped away from the endpoints
    const double p = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return std::min(std::max(p, 0x1.0p-53), 1.0 - 0x1.0p-53);
  };
  std::vector<Point> atoms;
  atoms.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double p = unit();
    switch (law.kind) {
      case Law::Kind::uniform:
        atoms.push_back(Point{law.p1 + (law.p2 - law.p1) * p});
        break;
      case Law::Kind::gaussian:
        atoms.push_back(Point{law.p1 + law.p2 * inverse_normal_cdf(p)});
        break;
      case Law::Kind::cauchy:
        atoms.push_back(Point{law.p1 + law.p2 * inverse_cauchy_cdf(p)});
        break;
    }
  }
  return DiscreteMeasure(std::move(atoms),
                         std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

namespace {

double w1_exact(const std::vector<Point>& xa, const std::vector<double>& wa,
                const std::vector<Point>& xb, const std::vector<double>& wb,
                const std::function<double(const Point&, const Point&)>& dist) {
  if (xa.size() + xb.size() > kExactW1Cap)
    throw CapacityError("wasserstein1: combined support exceeds the exact-method cap (2048)");
  std::vector<double> D(xa.size() * xb.size());
  for (std::size_t i = 0; i < xa.size(); ++i)
    for (std::size_t j = 0; j < xb.size(); ++j)
      D[i * xb.size() + j] = dist(xa[i], xb[j]);
  return detail::transport_optimal_cost(wa, wb, D);
}

}  // namespace

double wasserstein1(const DiscreteMeasure& a, const DiscreteMeasure& b, GroundMetric metric) {
  if (a.atom(0).dim() != b.atom(0).dim())
    throw ShapeMismatch("wasserstein1: dimension mismatch");
  auto dist = (metric == GroundMetric::euclidean_on_points)
                  ? std::function<double(const Point&, const Point&)>(euclidean_distance)
                  : std::function<double(const Point&, const Point&)>(sup_distance);
  return w1_exact(a.atoms(), a.weights(), b.atoms(), b.weights(), dist);
}

double wasserstein1(const Coupling& a, const Coupling& b, GroundMetric metric) {
  const std::size_t dx = a.row_support()[0].dim();
  const std::size_t dy = a.col_support()[0].dim();
  if (dx != b.row_support()[0].dim() || dy != b.col_support()[0].dim())
    throw ShapeMismatch("wasserstein1: coupling dimension mismatch");

  // Flatten product atoms to (x, y) concatenations, dropping zero-mass cells.
  auto flatten = [&](const Coupling& c, std::vector<Point>& pts, std::vector<double>& w) {
    for (std::size_t i = 0; i < c.rows(); ++i)
      for (std::size_t j = 0; j < c.cols(); ++j) {
        const double v = c.at(i, j);
        if (v == 0.0) continue;
        std::vector<double> coords = c.row_support()[i].coords;
        coords.insert(coords.end(), c.col_support()[j].coords.begin(),
                      c.col_support()[j].coords.end());
        pts.push_back(Point(std::move(coords)));
        w.push_back(v);
      }
  };
  std::vector<Point> pa, pb;
  std::vector<double> wa, wb;
  flatten(a, pa, wa);
  flatten(b, pb, wb);

  auto dist = [&](const Point& p, const Point& q) -> double {
    if (metric == GroundMetric::product_max) {
      double s1 = 0, s2 = 0;
      for (std::size_t i = 0; i < dx; ++i) s1 += (p[i] - q[i]) * (p[i] - q[i]);
      for (std::size_t i = dx; i < dx + dy; ++i) s2 += (p[i] - q[i]) * (p[i] - q[i]);
      return std::sqrt(std::max(s1, s2));
    }
    return euclidean_distance(p, q);
  };
  return w1_exact(pa, wa, pb, wb, dist);
}

}  // namespace eot
