#pragma once

// Discrete probability measures on R^d, couplings on product supports,
// quantile discretization of standard laws, and an exact 1-Wasserstein
// distance used throughout as the yardstick for weak convergence.

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <utility>
#include <vector>

#include "eot/errors.hpp"

namespace eot {

// A support point in R^d. All entries must be finite.
struct Point {
  std::vector<double> coords;

  Point() = default;
  Point(std::initializer_list<double> c) : coords(c) {}
  explicit Point(std::vector<double> c) : coords(std::move(c)) {}

  std::size_t dim() const { return coords.size(); }
  double operator[](std::size_t i) const { return coords[i]; }
};

double sup_distance(const Point& a, const Point& b);        // max_i |a_i - b_i|
double euclidean_distance(const Point& a, const Point& b);

// Finitely supported probability measure. Construction strips zero-weight
// atoms, merges duplicate atoms (sup-norm tolerance 1e-12), rejects negative
// weights, and validates that the total mass is 1 within 1e-12.
class DiscreteMeasure {
 public:
  DiscreteMeasure(std::vector<Point> atoms, std::vector<double> weights);

  std::size_t size() const { return atoms_.size(); }
  const Point& atom(std::size_t i) const { return atoms_[i]; }
  double weight(std::size_t i) const { return weights_[i]; }
  const std::vector<Point>& atoms() const { return atoms_; }
  const std::vector<double>& weights() const { return weights_; }

 private:
  std::vector<Point> atoms_;
  std::vector<double> weights_;
};

// Joint probability mass on the product of two finite supports, stored
// row-major. Entries are >= 0 and the total mass is 1 within 1e-12.
class Coupling {
 public:
  Coupling(std::vector<Point> row_support, std::vector<Point> col_support,
           std::vector<double> mass);

  std::size_t rows() const { return n_; }
  std::size_t cols() const { return m_; }
  double at(std::size_t i, std::size_t j) const { return mass_[i * m_ + j]; }
  const std::vector<Point>& row_support() const { return rows_; }
  const std::vector<Point>& col_support() const { return cols_; }
  const std::vector<double>& mass() const { return mass_; }

  std::vector<double> row_sums() const;
  std::vector<double> col_sums() const;
  double total_mass() const;

 private:
  std::vector<Point> rows_, cols_;
  std::vector<double> mass_;
  std::size_t n_ = 0, m_ = 0;
};

// P := mu (x) nu, the independent coupling.
Coupling product_measure(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

// Row/column sums attached to the respective supports; zero-mass atoms are
// stripped by the DiscreteMeasure constructor.
std::pair<DiscreteMeasure, DiscreteMeasure> marginals(const Coupling& pi);

// Named 1-D laws for quantile discretization.
struct Law {
  enum class Kind { uniform, gaussian, cauchy };
  Kind kind;
  double p1, p2;  // uniform: (a,b); gaussian: (mean, stddev); cauchy: (loc, scale)

  static Law uniform(double a, double b) { return {Kind::uniform, a, b}; }
  static Law gaussian(double m, double s) { return {Kind::gaussian, m, s}; }
  static Law cauchy(double loc, double scale) { return {Kind::cauchy, loc, scale}; }
};

// n-point quantile discretization: atoms at F^{-1}((i-1/2)/n) for i=1..n,
// weights 1/n each, atoms ascending. Deterministic, so experiments reproduce
// without seeds. Throws ValidationError for invalid law parameters.
DiscreteMeasure quantize(const Law& law, std::size_t n);

// Seeded i.i.d. sampling constructor — the secondary, randomized-suite path.
DiscreteMeasure sample_iid(const Law& law, std::size_t n, std::uint64_t seed);

// High-accuracy inverse CDFs, exposed so tests can oracle-check quantize.
double inverse_normal_cdf(double p);  // standard normal; |rel. err| < 1e-14
double inverse_cauchy_cdf(double p);  // standard Cauchy

enum class GroundMetric { euclidean_on_points, product_max };

// Exact 1-Wasserstein distance via a dense transportation simplex. The exact
// method caps the combined support size at 2048 atoms (CapacityError beyond).
// For plain measures, product_max degrades to the sup-norm on coordinates.
double wasserstein1(const DiscreteMeasure& a, const DiscreteMeasure& b,
                    GroundMetric metric = GroundMetric::euclidean_on_points);

// Couplings are compared as measures on the product space; with product_max
// the ground distance is max(d(x,x'), d(y,y')) over the two factor spaces.
double wasserstein1(const Coupling& a, const Coupling& b,
                    GroundMetric metric = GroundMetric::product_max);

}  // namespace eot
