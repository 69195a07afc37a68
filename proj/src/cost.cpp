#include "eot/cost.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace eot {

CostMatrix::CostMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : v_(std::move(values)), n_(rows), m_(cols) {
  if (n_ == 0 || m_ == 0 || v_.size() != n_ * m_)
    throw ShapeMismatch("cost matrix: shape mismatch");
  for (double x : v_)
    if (!std::isfinite(x)) throw ValidationError("cost matrix: non-finite entry");
}

CostMatrix evaluate_cost(const CostSpec& spec, const std::vector<Point>& rows,
                         const std::vector<Point>& cols) {
  if (rows.empty() || cols.empty()) throw ValidationError("evaluate_cost: empty support");
  const std::size_t n = rows.size(), m = cols.size();
  std::vector<double> v(n * m);
  switch (spec.kind) {
    case CostSpec::Kind::zero:
      break;  // already zero-initialized
    case CostSpec::Kind::squared_euclidean:
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
          const double d = euclidean_distance(rows[i], cols[j]);
          v[i * m + j] = d * d;
        }
      break;
    case CostSpec::Kind::absolute:
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
          v[i * m + j] = euclidean_distance(rows[i], cols[j]);
      break;
    case CostSpec::Kind::quadrant_indicator:
      if (rows[0].dim() != 1 || cols[0].dim() != 1)
        throw ValidationError("quadrant_indicator requires 1-D supports");
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
          v[i * m + j] = (rows[i][0] >= spec.ax && cols[j][0] >= spec.ay) ? 1.0 : 0.0;
      break;
    case CostSpec::Kind::custom_matrix: {
      if (spec.values.size() != n) throw ShapeMismatch("custom_matrix: row count mismatch");
      for (std::size_t i = 0; i < n; ++i) {
        if (spec.values[i].size() != m)
          throw ShapeMismatch("custom_matrix: column count mismatch");
        for (std::size_t j = 0; j < m; ++j) v[i * m + j] = spec.values[i][j];
      }
      break;
    }
  }
  return CostMatrix(n, m, std::move(v));
}

GibbsKernel::GibbsKernel(std::vector<double> log_density, std::size_t rows,
                         std::size_t cols, double epsilon, double log_norm)
    : ld_(std::move(log_density)), n_(rows), m_(cols), eps_(epsilon), log_norm_(log_norm) {
  if (n_ == 0 || m_ == 0 || ld_.size() != n_ * m_)
    throw ShapeMismatch("gibbs kernel: shape mismatch");
  if (!(eps_ > 0)) throw ValidationError("gibbs kernel: eps must be > 0");
  for (double x : ld_)
    if (!std::isfinite(x)) throw ValidationError("gibbs kernel: non-finite log density");
}

GibbsKernel gibbs_kernel(const CostMatrix& c, double eps, const Coupling& P) {
  if (!(eps > 0)) throw ValidationError("gibbs_kernel: eps must be > 0");
  if (c.rows() != P.rows() || c.cols() != P.cols())
    throw ShapeMismatch("gibbs_kernel: cost/P shape mismatch");
  const std::size_t n = c.rows(), m = c.cols();
  for (double p : P.mass())
    if (p <= 0) throw ValidationError("gibbs_kernel: P must be strictly positive");

  // log_norm = -log sum_ij exp(-c_ij/eps + log P_ij), max-subtracted.
  std::vector<double> expo(n * m);
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n * m; ++k) {
    expo[k] = -c.values()[k] / eps + std::log(P.mass()[k]);
    hi = std::max(hi, expo[k]);
  }
  double s = 0;
  for (std::size_t k = 0; k < n * m; ++k) s += std::exp(expo[k] - hi);
  const double log_norm = -(hi + std::log(s));

  std::vector<double> ld(n * m);
  for (std::size_t k = 0; k < n * m; ++k) ld[k] = -c.values()[k] / eps + log_norm;
  return GibbsKernel(std::move(ld), n, m, eps, log_norm);
}

Coupling reference_measure(const GibbsKernel& kernel, const Coupling& P) {
  if (kernel.rows() != P.rows() || kernel.cols() != P.cols())
    throw ShapeMismatch("reference_measure: shape mismatch");
  std::vector<double> mass(P.mass().size());
  for (std::size_t k = 0; k < mass.size(); ++k)
    mass[k] = std::exp(kernel.log_density_values()[k]) * P.mass()[k];
  return Coupling(P.row_support(), P.col_support(), std::move(mass));
}

}  // namespace eot
