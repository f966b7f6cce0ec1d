#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <span>
#include <vector>

#include "tpd/rng.hpp"
#include "tpd/video.hpp"

namespace tpd {

/// Energy distance between two clip sets (flattened pixels), V-statistic form:
/// 2 mean ||a - b|| - mean ||a - a'|| - mean ||b - b'|| over all pairs. Always
/// >= 0, zero for identical multisets, and symmetric bit-for-bit.
double energy_distance(std::span<const VideoTensor> a, std::span<const VideoTensor> b);

struct PermutationTest {
  double statistic = 0.0;
  double p_value = 1.0;
  double null_q95 = 0.0;
  double null_q99 = 0.0;
};

/// Permutation null of the energy distance by relabelling the pooled sample.
PermutationTest energy_permutation_test(std::span<const VideoTensor> a,
                                        std::span<const VideoTensor> b, int permutations,
                                        Rng& rng);

/// Mean |x_{2i+1} - x_{2i+2}| (0-based frames): the jump across the seams
/// between duplicated frame pairs produced by 2x nearest upsampling.
double pair_seam_discontinuity(const VideoTensor& clip);

/// Mean |x_{f+1} - x_f| over all adjacent frames.
double adjacent_frame_difference(const VideoTensor& clip);

/// Mean over generated clips of the per-frame MSE to the closest reference clip.
double per_frame_mse_to_nearest(std::span<const VideoTensor> generated,
                                std::span<const VideoTensor> reference);

struct EvalReport {
  double energy_distance = 0.0;
  double per_frame_mse_to_nearest = 0.0;
  double wall_time_train = 0.0;
  double wall_time_sample = 0.0;  // seconds per clip
  double token_pair_ratio = 1.0;
};

/// Appends `step,wall_seconds,loss,energy_distance` rows; every row is
/// flushed so an aborted run leaves a valid partial file.
class ConvergenceTracker {
 public:
  explicit ConvergenceTracker(const std::filesystem::path& path);

  void append(long step, double wall_seconds, double loss, double energy_distance);
  std::size_t rows() const { return rows_; }

 private:
  std::ofstream out_;
  std::size_t rows_ = 0;
  long last_step_ = -1;
  double last_wall_ = 0.0;
};

}  // namespace tpd
