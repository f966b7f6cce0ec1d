#include "tpd/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "tpd/error.hpp"

namespace tpd {

const char* to_string(Motion motion) {
  switch (motion) {
    case Motion::Blob: return "blob";
    case Motion::Dot: return "dot";
    case Motion::Mixed: return "mixed";
  }
  return "blob";
}

Motion parse_motion(const std::string& name) {
  if (name == "blob") return Motion::Blob;
  if (name == "dot") return Motion::Dot;
  if (name == "mixed") return Motion::Mixed;
  fail(ErrorKind::Config, "unknown motion family '" + name + "'");
}

void validate(const ClipSpec& spec) {
  if (spec.frames == 0 || spec.height == 0 || spec.width == 0 || spec.channels == 0) {
    fail(ErrorKind::Config, "clip dimensions must be positive");
  }
  if (spec.speed_min < 0.0 || spec.speed_max < spec.speed_min) {
    fail(ErrorKind::Config, "invalid speed range");
  }
  if (spec.intensity_min < 0.0 || spec.intensity_max > 1.0 ||
      spec.intensity_max < spec.intensity_min) {
    fail(ErrorKind::Config, "intensity range must lie in [0, 1]");
  }
}

namespace {

// Reflect a coordinate into [0, extent - 1].
double bounce(double p, double extent) {
  const double hi = extent - 1.0;
  if (hi <= 0.0) return 0.0;
  double period = 2.0 * hi;
  double m = std::fmod(p, period);
  if (m < 0.0) m += period;
  return m <= hi ? m : period - m;
}

}  // namespace

VideoTensor generate_clip(const ClipSpec& spec, Rng& rng) {
  validate(spec);
  const auto H = static_cast<double>(spec.height);
  const auto W = static_cast<double>(spec.width);

  Motion motion = spec.motion;
  if (motion == Motion::Mixed) motion = rng.uniform() < 0.5 ? Motion::Blob : Motion::Dot;

  const double y0 = rng.uniform(0.25 * (H - 1), 0.75 * (H - 1));
  const double x0 = rng.uniform(0.25 * (W - 1), 0.75 * (W - 1));
  const double speed = rng.uniform(spec.speed_min, spec.speed_max);
  const double heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double vy = speed * std::sin(heading);
  const double vx = speed * std::cos(heading);
  const double intensity = rng.uniform(spec.intensity_min, spec.intensity_max);
  const double radius = motion == Motion::Blob ? rng.uniform(0.9, 1.6) : 0.6;

  VideoTensor clip(spec.shape());
  for (std::size_t f = 0; f < spec.frames; ++f) {
    const double ft = static_cast<double>(f);
    double cy = y0 + vy * ft;
    double cx = x0 + vx * ft;
    if (motion == Motion::Dot) {
      cy = bounce(cy, H);
      cx = bounce(cx, W);
    }
    auto frame = clip.frame(f);
    for (std::size_t c = 0; c < spec.channels; ++c) {
      for (std::size_t y = 0; y < spec.height; ++y) {
        for (std::size_t x = 0; x < spec.width; ++x) {
          const double dy = static_cast<double>(y) - cy;
          const double dx = static_cast<double>(x) - cx;
          const double g = std::exp(-(dy * dy + dx * dx) / (2.0 * radius * radius));
          const double value = -1.0 + 2.0 * intensity * g;
          frame[(c * spec.height + y) * spec.width + x] = std::clamp(value, -1.0, 1.0);
        }
      }
    }
  }
  return clip;
}

Dataset::Dataset(ClipSpec spec, std::size_t n, std::uint64_t seed) : spec_(spec), seed_(seed) {
  if (n == 0) fail(ErrorKind::Config, "dataset needs at least one clip");
  validate(spec_);
  clips_.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(clip_seed(i));
    clips_.push_back(generate_clip(spec_, rng));
    (i % 2 == 0 ? train_ : heldout_).push_back(i);
  }
}

std::uint64_t Dataset::clip_seed(std::size_t i) const { return derive_seed(seed_, i); }

std::vector<VideoTensor> Dataset::heldout(std::size_t max_count) const {
  std::vector<VideoTensor> out;
  for (std::size_t i : heldout_) {
    if (out.size() >= max_count) break;
    out.push_back(clips_[i]);
  }
  return out;
}

Dataset generate_dataset(const ClipSpec& spec, std::size_t n, std::uint64_t seed) {
  return Dataset(spec, n, seed);
}

void dump_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream index(dir / "index.txt", std::ios::binary);
  if (!index) fail(ErrorKind::Io, "cannot write " + (dir / "index.txt").string());
  const auto& s = dataset.spec();
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "clip_%05zu.raw", i);
    write_raw(dir / name, dataset.clip(i));
    index << name << ' ' << dataset.clip_seed(i) << ' ' << s.frames << ' ' << s.channels << ' '
          << s.height << ' ' << s.width << ' ' << to_string(s.motion) << ' '
          << (i % 2 == 0 ? "train" : "heldout") << '\n';
  }
  if (!index) fail(ErrorKind::Io, "failed writing dataset index");
}

}  // namespace tpd
