#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tpd/rng.hpp"
#include "tpd/video.hpp"

namespace tpd {

enum class Motion { Blob, Dot, Mixed };

const char* to_string(Motion motion);
Motion parse_motion(const std::string& name);

struct ClipSpec {
  std::size_t frames = 16;
  std::size_t height = 8;
  std::size_t width = 8;
  std::size_t channels = 1;
  Motion motion = Motion::Blob;
  double speed_min = 0.0;  // pixels per frame
  double speed_max = 0.5;
  double intensity_min = 0.5;
  double intensity_max = 1.0;

  VideoShape shape() const { return {frames, channels, height, width}; }
};

void validate(const ClipSpec& spec);

/// One clip of a single moving object rendered on a -1 background; frame i
/// shows the motion state at time i. Values lie in [-1, 1].
VideoTensor generate_clip(const ClipSpec& spec, Rng& rng);

/// Deterministic set of i.i.d. clips; clip i is generated from
/// derive_seed(seed, i). Even indices form the training split, odd indices
/// the held-out split.
class Dataset {
 public:
  Dataset(ClipSpec spec, std::size_t n, std::uint64_t seed);

  const ClipSpec& spec() const { return spec_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t size() const { return clips_.size(); }
  const VideoTensor& clip(std::size_t i) const { return clips_[i]; }
  std::uint64_t clip_seed(std::size_t i) const;

  /// Indices of the training split; a one-clip dataset trains on that clip.
  const std::vector<std::size_t>& train_indices() const { return train_; }
  const std::vector<std::size_t>& heldout_indices() const { return heldout_; }

  std::vector<VideoTensor> heldout(std::size_t max_count) const;

 private:
  ClipSpec spec_;
  std::uint64_t seed_;
  std::vector<VideoTensor> clips_;
  std::vector<std::size_t> train_;
  std::vector<std::size_t> heldout_;
};

Dataset generate_dataset(const ClipSpec& spec, std::size_t n, std::uint64_t seed);

/// clip_00000.raw ... plus index.txt with one line per clip:
/// filename seed frames channels height width motion split
void dump_dataset(const Dataset& dataset, const std::filesystem::path& dir);

}  // namespace tpd
