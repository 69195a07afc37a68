#include "transport_simplex.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>

#include "eot/errors.hpp"

namespace eot::detail {
namespace {

// Node ids: rows are 0..n-1, columns are n..n+m-1.
struct Arc {
  std::size_t i, j;  // cell indices (row, col)
};

}  // namespace

double transport_optimal_cost(const std::vector<double>& supply,
                              const std::vector<double>& demand,
                              const std::vector<double>& cost) {
  const std::size_t n = supply.size(), m = demand.size();
  if (n == 0 || m == 0 || cost.size() != n * m)
    throw ShapeMismatch("transport: shape mismatch");

  std::vector<double> x(n * m, 0.0);
  std::vector<std::uint8_t> basic(n * m, 0);

  // Northwest-corner start: one cell per step, exactly n+m-1 basic cells
  // (degenerate zero allocations included on ties).
  {
    std::vector<double> ra = supply, rb = demand;
    std::size_t i = 0, j = 0;
    while (true) {
      const double t = std::min(ra[i], rb[j]);
      x[i * m + j] = t;
      basic[i * m + j] = 1;
      ra[i] -= t;
      rb[j] -= t;
      if (i == n - 1 && j == m - 1) break;
      if (i < n - 1 && (ra[i] <= rb[j] || j == m - 1))
        ++i;
      else
        ++j;
    }
  }

  const std::size_t nodes = n + m;
  // Adjacency of the basis spanning tree; entries are (neighbor node, cell).
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj(nodes);
  auto link = [&](std::size_t i, std::size_t j) {
    adj[i].push_back({n + j, i * m + j});
    adj[n + j].push_back({i, i * m + j});
  };
  auto unlink = [&](std::size_t i, std::size_t j) {
    const std::size_t cell = i * m + j;
    auto drop = [&](std::size_t node) {
      auto& v = adj[node];
      v.erase(std::find_if(v.begin(), v.end(),
                           [&](const auto& e) { return e.second == cell; }));
    };
    drop(i);
    drop(n + j);
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (basic[i * m + j]) link(i, j);

  double max_cost = 0;
  for (double c : cost) max_cost = std::max(max_cost, std::abs(c));
  const double enter_tol = 1e-13 * (1.0 + max_cost);

  std::vector<double> u(n), v(m);
  std::vector<std::size_t> parent(nodes), parent_cell(nodes);
  std::vector<std::uint8_t> seen(nodes);

  // Duals from the spanning tree, rooted at row 0 with u[0] = 0.
  auto compute_duals = [&]() {
    std::fill(seen.begin(), seen.end(), std::uint8_t{0});
    std::vector<std::size_t> stack{0};
    seen[0] = 1;
    u[0] = 0.0;
    while (!stack.empty()) {
      const std::size_t node = stack.back();
      stack.pop_back();
      for (const auto& [nb, cell] : adj[node]) {
        if (seen[nb]) continue;
        seen[nb] = 1;
        if (node < n)
          v[nb - n] = cost[cell] - u[node];
        else
          u[nb] = cost[cell] - v[node - n];
        stack.push_back(nb);
      }
    }
  };

  // Tree path between the entering arc's endpoints (row node ei to col node
  // n+ej), via BFS parents.
  auto tree_path = [&](std::size_t from, std::size_t to) {
    std::fill(seen.begin(), seen.end(), std::uint8_t{0});
    std::queue<std::size_t> q;
    q.push(from);
    seen[from] = 1;
    while (!q.empty()) {
      const std::size_t node = q.front();
      q.pop();
      if (node == to) break;
      for (const auto& [nb, cell] : adj[node]) {
        if (seen[nb]) continue;
        seen[nb] = 1;
        parent[nb] = node;
        parent_cell[nb] = cell;
        q.push(nb);
      }
    }
    std::vector<std::size_t> cells;  // cells along to -> from
    for (std::size_t node = to; node != from; node = parent[node])
      cells.push_back(parent_cell[node]);
    return cells;
  };

  const long max_pivots = 200000;
  long stalled = 0;  // consecutive degenerate pivots; triggers Bland's rule
  long pivot = 0;
  for (; pivot < max_pivots; ++pivot) {
    compute_duals();

    // Entering arc: most negative reduced cost (Dantzig); under a degeneracy
    // stall, first negative in scan order (Bland) to guarantee termination.
    const bool bland = stalled >= 64;
    double best = -enter_tol;
    std::size_t ei = n, ej = m;
    for (std::size_t i = 0; i < n && (ei == n || !bland); ++i) {
      const double* crow = &cost[i * m];
      for (std::size_t j = 0; j < m; ++j) {
        if (basic[i * m + j]) continue;
        const double rc = crow[j] - u[i] - v[j];
        if (rc < best) {
          best = rc;
          ei = i;
          ej = j;
          if (bland) break;
        }
      }
    }
    if (ei == n) break;  // optimal

    // Cycle = entering arc (+) then the tree path from col ej back to row ei,
    // with alternating signs; theta is the minimum over the (-) cells.
    const auto path = tree_path(ei, n + ej);  // cells along (n+ej) -> ei
    double theta = std::numeric_limits<double>::infinity();
    std::size_t leave_pos = 0;
    for (std::size_t t = 0; t < path.size(); t += 2) {
      if (x[path[t]] < theta) {
        theta = x[path[t]];
        leave_pos = t;
      }
    }
    x[ei * m + ej] += theta;
    for (std::size_t t = 0; t < path.size(); ++t) {
      if (t % 2 == 0) {
        x[path[t]] -= theta;
        if (x[path[t]] < 1e-15) x[path[t]] = 0.0;
      } else {
        x[path[t]] += theta;
      }
    }
    const std::size_t leave = path[leave_pos];
    basic[leave] = 0;
    unlink(leave / m, leave % m);
    basic[ei * m + ej] = 1;
    link(ei, ej);

    stalled = (theta <= 0.0) ? stalled + 1 : 0;
  }
  if (pivot == max_pivots)
    throw Error("transport: pivot limit exceeded");

  double total = 0.0;
  for (std::size_t c = 0; c < n * m; ++c)
    if (basic[c]) total += x[c] * cost[c];
  return total;
}

}  // namespace eot::detail
