#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "viewpcl/detail/rng.hpp"
#include "viewpcl/errors.hpp"
#include "viewpcl/probability.hpp"

namespace viewpcl {

struct TransportConfig {
  double order = 1.0;        // Wasserstein order p
  int num_projections = 64;  // slicing directions L
  std::uint64_t rng_seed = 0;
  int exact_cutoff = 32;  // dissimilarity uses the exact solver up to this many atoms per side
};

/// Nonnegative m x n mass matrix with row sums = source weights and column
/// sums = target weights.
struct TransportPlan {
  int rows = 0;
  int cols = 0;
  std::vector<double> pi;  // row-major

  double operator()(int i, int j) const {
    return pi[static_cast<std::size_t>(i) * cols + j];
  }
};

namespace detail {

inline double pixel_distance(PixelCoord a, PixelCoord b) {
  const double dr = a.row - b.row;
  const double dc = a.col - b.col;
  return std::sqrt(dr * dr + dc * dc);
}

/// Renormalizes both weight vectors to sum 1; rejects mismatched weight sums.
inline void check_and_normalize(std::vector<double>& a, std::vector<double>& b) {
  const double sa = std::accumulate(a.begin(), a.end(), 0.0);
  const double sb = std::accumulate(b.begin(), b.end(), 0.0);
  if (!(sa > 0) || !(sb > 0) || std::abs(sa - sb) > 1e-6)
    throw InfeasibleMarginals("transport: weight sums differ (" + std::to_string(sa) +
                              " vs " + std::to_string(sb) + ")");
  for (double& w : a) w /= sa;
  for (double& w : b) w /= sb;
}

/// Transportation simplex (u-v method) on a dense cost matrix. Bland's rule
/// on both the entering and leaving choice, so degenerate instances (uniform
/// marginals) terminate without cycling. Returns the optimal objective and
/// fills the plan.
class TransportationSimplex {
 public:
  TransportationSimplex(std::vector<double> supply, std::vector<double> demand,
                        std::vector<double> cost)
      : m_(static_cast<int>(supply.size())),
        n_(static_cast<int>(demand.size())),
        supply_(std::move(supply)),
        demand_(std::move(demand)),
        cost_(std::move(cost)) {}

  double solve(TransportPlan& plan) {
    northwest_corner();
    const double tol =
        1e-12 * (1.0 + *std::max_element(cost_.begin(), cost_.end()));
    while (true) {
      compute_duals();
      const int entering = find_entering(tol);
      if (entering < 0) break;
      pivot(entering);
    }
    plan.rows = m_;
    plan.cols = n_;
    plan.pi.assign(static_cast<std::size_t>(m_) * n_, 0.0);
    double objective = 0.0;
    for (int k = 0; k < basis_size_; ++k) {
      plan.pi[cell_[k]] = flow_[k];
      objective += flow_[k] * cost_[cell_[k]];
    }
    return objective;
  }

 private:
  int node_of_row(int i) const { return i; }
  int node_of_col(int j) const { return m_ + j; }

  void northwest_corner() {
    std::vector<double> rem_a = supply_;
    std::vector<double> rem_b = demand_;
    int i = 0, j = 0;
    while (true) {
      const double f = std::min(rem_a[i], rem_b[j]);
      push_basic(i, j, f);
      rem_a[i] -= f;
      rem_b[j] -= f;
      if (i == m_ - 1 && j == n_ - 1) break;
      // On a tie advance only the row, leaving a degenerate zero cell, so the
      // basis keeps exactly m + n - 1 cells.
      if (rem_a[i] <= 0.0 && i < m_ - 1)
        ++i;
      else
        ++j;
    }
  }

  void push_basic(int i, int j, double f) {
    cell_.push_back(static_cast<std::size_t>(i) * n_ + j);
    flow_.push_back(f);
    ++basis_size_;
  }

  // Duals from the basis tree: u_i + v_j = c_ij on basic cells, u_0 = 0.
  void compute_duals() {
    u_.assign(m_, 0.0);
    v_.assign(n_, 0.0);
    adj_.assign(m_ + n_, {});
    for (int k = 0; k < basis_size_; ++k) {
      const int i = static_cast<int>(cell_[k] / n_);
      const int j = static_cast<int>(cell_[k] % n_);
      adj_[node_of_row(i)].push_back(k);
      adj_[node_of_col(j)].push_back(k);
    }
    std::vector<std::uint8_t> seen(m_ + n_, 0);
    std::vector<int> stack = {node_of_row(0)};
    seen[node_of_row(0)] = 1;
    while (!stack.empty()) {
      const int node = stack.back();
      stack.pop_back();
      for (const int k : adj_[node]) {
        const int i = static_cast<int>(cell_[k] / n_);
        const int j = static_cast<int>(cell_[k] % n_);
        const int other = node == node_of_row(i) ? node_of_col(j) : node_of_row(i);
        if (seen[other]) continue;
        seen[other] = 1;
        if (other == node_of_col(j))
          v_[j] = cost_[cell_[k]] - u_[i];
        else
          u_[i] = cost_[cell_[k]] - v_[j];
        stack.push_back(other);
      }
    }
  }

  // Bland: smallest-index cell with negative reduced cost.
  int find_entering(double tol) const {
    std::vector<std::uint8_t> basic(static_cast<std::size_t>(m_) * n_, 0);
    for (int k = 0; k < basis_size_; ++k) basic[cell_[k]] = 1;
    for (int i = 0; i < m_; ++i) {
      for (int j = 0; j < n_; ++j) {
        const std::size_t c = static_cast<std::size_t>(i) * n_ + j;
        if (basic[c]) continue;
        if (cost_[c] - u_[i] - v_[j] < -tol) return static_cast<int>(c);
      }
    }
    return -1;
  }

  // Entering cell closes a unique cycle with the basis tree. Flow moves
  // around the cycle: + on the entering cell, alternating thereafter.
  void pivot(int entering) {
    const int ei = entering / n_;
    const int ej = entering % n_;

    // Path in the basis tree from row node ei to column node ej.
    std::vector<int> parent_edge(m_ + n_, -1);
    std::vector<int> parent_node(m_ + n_, -1);
    std::vector<std::uint8_t> seen(m_ + n_, 0);
    std::vector<int> stack = {node_of_row(ei)};
    seen[node_of_row(ei)] = 1;
    while (!stack.empty()) {
      const int node = stack.back();
      stack.pop_back();
      if (node == node_of_col(ej)) break;
      for (const int k : adj_[node]) {
        const int i = static_cast<int>(cell_[k] / n_);
        const int j = static_cast<int>(cell_[k] % n_);
        const int other = node == node_of_row(i) ? node_of_col(j) : node_of_row(i);
        if (seen[other]) continue;
        seen[other] = 1;
        parent_edge[other] = k;
        parent_node[other] = node;
        stack.push_back(other);
      }
    }

    std::vector<int> path;  // basis indices from ej back to ei
    for (int node = node_of_col(ej); node != node_of_row(ei); node = parent_node[node])
      path.push_back(parent_edge[node]);

    // Walking the cycle entering -> ej -> ... -> ei, edges alternate -,+,...
    double theta = std::numeric_limits<double>::infinity();
    int leaving_pos = -1;
    for (std::size_t s = 0; s < path.size(); s += 2) {
      const int k = path[s];
      if (flow_[k] < theta ||
          (flow_[k] == theta && cell_[k] < cell_[path[leaving_pos]])) {
        theta = flow_[k];
        leaving_pos = static_cast<int>(s);
      }
    }

    for (std::size_t s = 0; s < path.size(); ++s) {
      if (s % 2 == 0)
        flow_[path[s]] -= theta;
      else
        flow_[path[s]] += theta;
    }
    const int leaving = path[static_cast<std::size_t>(leaving_pos)];
    cell_[leaving] = static_cast<std::size_t>(entering);
    flow_[leaving] = theta;
  }

  int m_, n_;
  std::vector<double> supply_, demand_, cost_;
  std::vector<std::size_t> cell_;  // basic cells as flat indices
  std::vector<double> flow_;
  int basis_size_ = 0;
  std::vector<double> u_, v_;
  std::vector<std::vector<int>> adj_;
};

/// Exact 1D W_p^p between weighted point sets via the quantile coupling.
inline double wasserstein_1d_pow(std::vector<double> xs, std::vector<double> xw,
                                 std::vector<double> ys, std::vector<double> yw,
                                 double p) {
  std::vector<int> xi(xs.size()), yi(ys.size());
  std::iota(xi.begin(), xi.end(), 0);
  std::iota(yi.begin(), yi.end(), 0);
  std::sort(xi.begin(), xi.end(), [&](int a, int b) {
    return xs[a] < xs[b] || (xs[a] == xs[b] && a < b);
  });
  std::sort(yi.begin(), yi.end(), [&](int a, int b) {
    return ys[a] < ys[b] || (ys[a] == ys[b] && a < b);
  });
  double cost = 0.0;
  std::size_t i = 0, j = 0;
  double ra = xw[xi[0]], rb = yw[yi[0]];
  while (true) {
    const double step = std::min(ra, rb);
    const double gap = std::abs(xs[xi[i]] - ys[yi[j]]);
    cost += step * (p == 1.0 ? gap : std::pow(gap, p));
    ra -= step;
    rb -= step;
    if (ra <= 0.0) {
      if (++i == xi.size()) break;
      ra = xw[xi[i]];
    }
    if (rb <= 0.0) {
      if (++j == yi.size()) break;
      rb = yw[yi[j]];
    }
  }
  return cost;
}

}  // namespace detail

/// Exact W_p via the transportation simplex; reference solver and the
/// small-instance path of dissimilarity().
inline std::pair<double, TransportPlan> exact_wasserstein(
    const PointCloudDistribution& mu, const PointCloudDistribution& nu,
    const TransportConfig& cfg) {
  if (mu.points.empty() || nu.points.empty())
    throw InfeasibleMarginals("exact_wasserstein: empty distribution");
  std::vector<double> a = mu.weights;
  std::vector<double> b = nu.weights;
  detail::check_and_normalize(a, b);

  const double p = cfg.order;
  std::vector<double> cost(a.size() * b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      const double d = detail::pixel_distance(mu.points[i], nu.points[j]);
      cost[i * b.size() + j] = p == 1.0 ? d : std::pow(d, p);
    }
  }
  detail::TransportationSimplex solver(std::move(a), std::move(b), std::move(cost));
  TransportPlan plan;
  const double objective = solver.solve(plan);
  return {std::pow(std::max(objective, 0.0), 1.0 / p), std::move(plan)};
}

/// SW_p^p = mean over L random directions of the 1D W_p^p of the projections.
/// Directions are theta_l = (cos a_l, sin a_l) with a_l uniform on [0, pi)
/// from the counter-based stream of cfg.rng_seed, so results are
/// deterministic and platform independent.
inline double sliced_wasserstein(const PointCloudDistribution& mu,
                                 const PointCloudDistribution& nu,
                                 const TransportConfig& cfg) {
  if (mu.points.empty() || nu.points.empty())
    throw InfeasibleMarginals("sliced_wasserstein: empty distribution");
  std::vector<double> a = mu.weights;
  std::vector<double> b = nu.weights;
  detail::check_and_normalize(a, b);

  const double p = cfg.order;
  const int L = cfg.num_projections;
  std::vector<double> xs(mu.points.size()), ys(nu.points.size());
  double acc = 0.0;
  for (int l = 0; l < L; ++l) {
    const double alpha =
        M_PI * detail::counter_unit(cfg.rng_seed, static_cast<std::uint64_t>(l));
    const double ct = std::cos(alpha), st = std::sin(alpha);
    for (std::size_t i = 0; i < xs.size(); ++i)
      xs[i] = ct * mu.points[i].row + st * mu.points[i].col;
    for (std::size_t j = 0; j < ys.size(); ++j)
      ys[j] = ct * nu.points[j].row + st * nu.points[j].col;
    acc += detail::wasserstein_1d_pow(xs, a, ys, b, p);
  }
  return std::pow(acc / L, 1.0 / p);
}

/// Appendix escape transport: cost of moving mu to the nearest point on the
/// boundary of the axis-aligned bounding box of D, aggregated at order p.
inline double escape_cost(const PointCloudDistribution& mu,
                          const std::vector<PixelCoord>& region,
                          const TransportConfig& cfg) {
  if (mu.points.empty()) throw InfeasibleMarginals("escape_cost: empty distribution");
  if (region.empty()) throw EmptyRegion("escape_cost: empty region");
  int r0 = region.front().row, r1 = r0;
  int c0 = region.front().col, c1 = c0;
  for (const PixelCoord& z : region) {
    r0 = std::min(r0, z.row);
    r1 = std::max(r1, z.row);
    c0 = std::min(c0, z.col);
    c1 = std::max(c1, z.col);
  }
  const double p = cfg.order;
  double acc = 0.0;
  for (std::size_t k = 0; k < mu.size(); ++k) {
    const PixelCoord z = mu.points[k];
    double d;
    if (z.row >= r0 && z.row <= r1 && z.col >= c0 && z.col <= c1) {
      d = std::min(std::min(z.row - r0, r1 - z.row),
                   std::min(z.col - c0, c1 - z.col));
    } else {
      const double dr = z.row < r0 ? r0 - z.row : (z.row > r1 ? z.row - r1 : 0);
      const double dc = z.col < c0 ? c0 - z.col : (z.col > c1 ? z.col - c1 : 0);
      d = std::sqrt(dr * dr + dc * dc);
    }
    acc += mu.weights[k] * (p == 1.0 ? d : std::pow(d, p));
  }
  return std::pow(acc, 1.0 / p);
}

/// W(.,.) dispatch: both sides present -> sliced Wasserstein (exact solver
/// when both supports are at most cfg.exact_cutoff atoms); one side absent ->
/// escape cost of the present side.
inline double dissimilarity(const std::optional<PointCloudDistribution>& mu1,
                            const std::optional<PointCloudDistribution>& mu2,
                            const std::vector<PixelCoord>& region,
                            const TransportConfig& cfg) {
  if (!mu1 && !mu2) throw BothAbsent("dissimilarity: both distributions absent");
  if (mu1 && mu2) {
    const std::size_t cutoff = static_cast<std::size_t>(cfg.exact_cutoff);
    if (mu1->size() <= cutoff && mu2->size() <= cutoff)
      return exact_wasserstein(*mu1, *mu2, cfg).first;
    return sliced_wasserstein(*mu1, *mu2, cfg);
  }
  return escape_cost(mu1 ? *mu1 : *mu2, region, cfg);
}

}  // namespace viewpcl
