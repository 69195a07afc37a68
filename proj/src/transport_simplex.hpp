#pragma once

// Dense transportation simplex on a complete bipartite instance: minimize
// sum_ij cost[i*m+j] * x_ij subject to row sums = supply, column sums =
// demand, x >= 0. Supplies and demands must each total the same mass.
// Internal to the library; wasserstein1 is the public face.

#include <cstddef>
#include <vector>

namespace eot::detail {

// Returns the optimal objective value. Deterministic: fixed pivot scan order,
// Dantzig entering rule with a Bland fallback that guarantees termination on
// the highly degenerate equal-mass instances quantile discretization creates.
double transport_optimal_cost(const std::vector<double>& supply,
                              const std::vector<double>& demand,
                              const std::vector<double>& cost);

}  // namespace eot::detail
