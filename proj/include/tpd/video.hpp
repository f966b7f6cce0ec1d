#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tpd/rng.hpp"

namespace tpd {

struct VideoShape {
  std::size_t frames = 1;
  std::size_t channels = 1;
  std::size_t height = 1;
  std::size_t width = 1;

  std::size_t frame_size() const { return channels * height * width; }
  std::size_t numel() const { return frames * frame_size(); }
  VideoShape with_frames(std::size_t f) const { return {f, channels, height, width}; }

  bool operator==(const VideoShape&) const = default;
};

/// Dense [frames x channels x height x width] clip. `stride_level` k means the
/// tensor holds every 2^k-th frame of the full-rate clip.
class VideoTensor {
 public:
  VideoTensor() = default;
  explicit VideoTensor(VideoShape shape, int stride_level = 0);
  VideoTensor(VideoShape shape, std::vector<double> data, int stride_level = 0);

  const VideoShape& shape() const { return shape_; }
  std::size_t frames() const { return shape_.frames; }
  std::size_t frame_size() const { return shape_.frame_size(); }
  std::size_t size() const { return data_.size(); }
  int stride_level() const { return stride_level_; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  std::span<double> frame(std::size_t f) {
    return std::span<double>(data_).subspan(f * frame_size(), frame_size());
  }
  std::span<const double> frame(std::size_t f) const {
    return std::span<const double>(data_).subspan(f * frame_size(), frame_size());
  }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  bool operator==(const VideoTensor&) const = default;

 private:
  VideoShape shape_{};
  int stride_level_ = 0;
  std::vector<double> data_;
};

/// a * x + b * y. Throws Shape when x and y differ in shape.
VideoTensor lincomb(double a, const VideoTensor& x, double b, const VideoTensor& y);
VideoTensor scaled(double a, const VideoTensor& x);
void require_same_shape(const VideoTensor& a, const VideoTensor& b, const char* what);

/// Keeps frames 0, factor, 2*factor, ...
VideoTensor down_temporal(const VideoTensor& x, std::size_t factor);

/// Repeats each frame `factor` times in order.
VideoTensor up_temporal_nearest(const VideoTensor& x, std::size_t factor);

/// I.i.d. N(0, 1) entries drawn from `rng`.
VideoTensor sample_gaussian(VideoShape shape, Rng& rng);
VideoTensor sample_gaussian(VideoShape shape, std::uint64_t seed);

bool is_power_of_two(std::size_t n);
int log2_exact(std::size_t n);

double squared_distance(std::span<const double> a, std::span<const double> b);

// Raw dump: 16-byte header of four little-endian uint32 (F, C, H, W) followed
// by F*C*H*W little-endian float32 values.
void write_raw(const std::filesystem::path& path, const VideoTensor& x);
VideoTensor read_raw(const std::filesystem::path& path);

}  // namespace tpd
