#include "tpd/alignment.hpp"

#include <cmath>
#include <limits>

#include "tpd/error.hpp"

namespace tpd {

CostMatrix pairwise_sq_dist(std::span<const VideoTensor> xs, std::span<const VideoTensor> es) {
  if (xs.size() != es.size()) fail(ErrorKind::Shape, "pairwise_sq_dist: batch size mismatch");
  CostMatrix cost{xs.size(), std::vector<double>(xs.size() * xs.size(), 0.0)};
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t j = 0; j < es.size(); ++j) {
      if (xs[i].size() != es[j].size()) {
        fail(ErrorKind::Shape, "pairwise_sq_dist: flattened length mismatch");
      }
      cost(i, j) = squared_distance(xs[i].data(), es[j].data());
    }
  }
  return cost;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Solver {
  const CostMatrix& cost;
  std::size_t n;
  std::vector<double> u, v, shortest;
  std::vector<std::ptrdiff_t> path, col4row, row4col;
  std::vector<std::size_t> remaining;
  std::vector<bool> visited_row, visited_col;

  explicit Solver(const CostMatrix& c)
      : cost(c),
        n(c.n),
        u(n, 0.0),
        v(n, 0.0),
        shortest(n, kInf),
        path(n, -1),
        col4row(n, -1),
        row4col(n, -1),
        remaining(n),
        visited_row(n, false),
        visited_col(n, false) {}

  // Dijkstra-style search for the cheapest augmenting path from `row` in the
  // reduced costs. Returns the free column that ends the path.
  std::size_t augment(std::size_t row, double& min_val) {
    min_val = 0.0;
    std::size_t num_remaining = n;
    for (std::size_t it = 0; it < n; ++it) remaining[it] = it;
    std::fill(visited_row.begin(), visited_row.end(), false);
    std::fill(visited_col.begin(), visited_col.end(), false);
    std::fill(shortest.begin(), shortest.end(), kInf);

    std::size_t i = row;
    while (true) {
      std::size_t index = n;
      double lowest = kInf;
      visited_row[i] = true;
      for (std::size_t it = 0; it < num_remaining; ++it) {
        const std::size_t j = remaining[it];
        const double r = min_val + cost(i, j) - u[i] - v[j];
        if (r < shortest[j]) {
          path[j] = static_cast<std::ptrdiff_t>(i);
          shortest[j] = r;
        }
        if (shortest[j] < lowest || (shortest[j] == lowest && row4col[j] == -1 &&
                                     (index == n || row4col[remaining[index]] != -1))) {
          lowest = shortest[j];
          index = it;
        }
      }
      min_val = lowest;
      if (index == n || !std::isfinite(min_val)) {
        fail(ErrorKind::Numerical, "linear_sum_assignment: no feasible augmenting path");
      }
      const std::size_t j = remaining[index];
      visited_col[j] = true;
      remaining[index] = remaining[--num_remaining];
      if (row4col[j] == -1) return j;
      i = static_cast<std::size_t>(row4col[j]);
    }
  }

  void run() {
    for (std::size_t cur = 0; cur < n; ++cur) {
      double min_val = 0.0;
      std::size_t sink = augment(cur, min_val);

      u[cur] += min_val;
      for (std::size_t i = 0; i < n; ++i) {
        if (visited_row[i] && i != cur) {
          u[i] += min_val - shortest[static_cast<std::size_t>(col4row[i])];
        }
      }
      for (std::size_t j = 0; j < n; ++j) {
        if (visited_col[j]) v[j] -= min_val - shortest[j];
      }

      std::ptrdiff_t j = static_cast<std::ptrdiff_t>(sink);
      while (true) {
        const std::ptrdiff_t i = path[static_cast<std::size_t>(j)];
        row4col[static_cast<std::size_t>(j)] = i;
        std::swap(col4row[static_cast<std::size_t>(i)], j);
        if (i == static_cast<std::ptrdiff_t>(cur)) break;
      }
    }
  }
};

}  // namespace

AssignmentResult linear_sum_assignment(const CostMatrix& cost) {
  if (cost.values.size() != cost.n * cost.n) {
    fail(ErrorKind::Input, "linear_sum_assignment: cost matrix is not square");
  }
  for (double c : cost.values) {
    if (!std::isfinite(c)) fail(ErrorKind::Input, "linear_sum_assignment: non-finite cost");
  }
  AssignmentResult result;
  if (cost.n == 0) return result;

  Solver solver(cost);
  solver.run();
  result.permutation.resize(cost.n);
  for (std::size_t i = 0; i < cost.n; ++i) {
    result.permutation[i] = static_cast<std::size_t>(solver.col4row[i]);
    result.total_cost += cost(i, result.permutation[i]);
  }
  return result;
}

std::vector<VideoTensor> align_noise(std::span<const VideoTensor> x_batch,
                                     std::span<const VideoTensor> eps_batch,
                                     AssignmentResult& assignment) {
  if (x_batch.size() != eps_batch.size()) {
    fail(ErrorKind::Shape, "align_noise: batch size mismatch");
  }
  for (std::size_t i = 0; i < x_batch.size(); ++i) {
    require_same_shape(x_batch[i], eps_batch[i], "align_noise");
  }
  assignment = linear_sum_assignment(pairwise_sq_dist(x_batch, eps_batch));
  std::vector<VideoTensor> aligned;
  aligned.reserve(eps_batch.size());
  for (std::size_t i = 0; i < x_batch.size(); ++i) {
    aligned.push_back(eps_batch[assignment.permutation[i]]);
  }
  return aligned;
}

std::vector<VideoTensor> align_noise(std::span<const VideoTensor> x_batch,
                                     std::span<const VideoTensor> eps_batch) {
  AssignmentResult unused;
  return align_noise(x_batch, eps_batch, unused);
}

}  // namespace tpd
