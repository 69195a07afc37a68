#pragma once

// Cost functions evaluated on support grids and the log-domain Gibbs
// reference measure dR/dP = a * exp(-c/eps). Kernels are stored in log
// domain exclusively; linear-domain densities are derived views, so eps
// down to 1e-3 stays representable without underflow.

#include <cstddef>
#include <vector>

#include "eot/errors.hpp"
#include "eot/measure.hpp"

namespace eot {

struct CostSpec {
  enum class Kind { zero, squared_euclidean, absolute, quadrant_indicator, custom_matrix };
  Kind kind = Kind::zero;
  double ax = 0, ay = 0;                    // quadrant_indicator corner
  std::vector<std::vector<double>> values;  // custom_matrix payload

  static CostSpec zero() { return {Kind::zero, 0, 0, {}}; }
  static CostSpec squared_euclidean() { return {Kind::squared_euclidean, 0, 0, {}}; }
  static CostSpec absolute() { return {Kind::absolute, 0, 0, {}}; }
  static CostSpec quadrant(double ax, double ay) {
    return {Kind::quadrant_indicator, ax, ay, {}};
  }
  static CostSpec custom(std::vector<std::vector<double>> v) {
    return {Kind::custom_matrix, 0, 0, std::move(v)};
  }
};

// Cost values aligned with a (row_support, col_support) grid. Entries must be
// finite; negative entries are permitted (perturbation schedules subtract
// bounded bumps), while the built-in CostSpecs only produce values >= 0.
class CostMatrix {
 public:
  CostMatrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  std::size_t rows() const { return n_; }
  std::size_t cols() const { return m_; }
  double at(std::size_t i, std::size_t j) const { return v_[i * m_ + j]; }
  const std::vector<double>& values() const { return v_; }

 private:
  std::vector<double> v_;
  std::size_t n_, m_;
};

CostMatrix evaluate_cost(const CostSpec& spec, const std::vector<Point>& rows,
                         const std::vector<Point>& cols);

// log(dR/dP) on the support grid: entry_ij = -c_ij/eps + log_norm, where
// log_norm = -log sum_ij exp(-c_ij/eps) P_ij makes R a probability measure.
class GibbsKernel {
 public:
  GibbsKernel(std::vector<double> log_density, std::size_t rows, std::size_t cols,
              double epsilon, double log_norm);

  std::size_t rows() const { return n_; }
  std::size_t cols() const { return m_; }
  double log_density(std::size_t i, std::size_t j) const { return ld_[i * m_ + j]; }
  const std::vector<double>& log_density_values() const { return ld_; }
  double epsilon() const { return eps_; }
  double log_norm() const { return log_norm_; }

 private:
  std::vector<double> ld_;
  std::size_t n_, m_;
  double eps_, log_norm_;
};

// Builds the kernel from a cost matrix; the normalizing constant is computed
// with a max-subtracted log-sum-exp so large costs cannot overflow.
GibbsKernel gibbs_kernel(const CostMatrix& c, double eps, const Coupling& P);

// Materializes R_ij = exp(log_density_ij) * P_ij as a Coupling. Its marginals
// generally differ from (mu, nu).
Coupling reference_measure(const GibbsKernel& kernel, const Coupling& P);

}  // namespace eot
