#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tpd/video.hpp"

namespace tpd {

/// Square row-major cost matrix.
struct CostMatrix {
  std::size_t n = 0;
  std::vector<double> values;

  double operator()(std::size_t row, std::size_t col) const { return values[row * n + col]; }
  double& operator()(std::size_t row, std::size_t col) { return values[row * n + col]; }
};

struct AssignmentResult {
  /// permutation[row] = column assigned to that row.
  std::vector<std::size_t> permutation;
  double total_cost = 0.0;
};

/// cost[i][j] = ||xs[i] - es[j]||^2, accumulated in double precision.
CostMatrix pairwise_sq_dist(std::span<const VideoTensor> xs, std::span<const VideoTensor> es);

/// Exact minimum-cost perfect matching (shortest augmenting path,
/// Jonker-Volgenant style, O(n^3)). Ties resolve towards lower indices so the
/// result is a deterministic function of the input.
AssignmentResult linear_sum_assignment(const CostMatrix& cost);

/// Returns eps_batch reordered so eps'[i] is the noise assigned to x_batch[i]
/// by the minimum total squared-distance matching.
std::vector<VideoTensor> align_noise(std::span<const VideoTensor> x_batch,
                                     std::span<const VideoTensor> eps_batch);

/// Same, also reporting the assignment.
std::vector<VideoTensor> align_noise(std::span<const VideoTensor> x_batch,
                                     std::span<const VideoTensor> eps_batch,
                                     AssignmentResult& assignment);

}  // namespace tpd
