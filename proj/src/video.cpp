#include "tpd/video.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "tpd/error.hpp"

namespace tpd {

namespace {

std::string shape_str(const VideoShape& s) {
  std::ostringstream os;
  os << "[" << s.frames << "x" << s.channels << "x" << s.height << "x" << s.width << "]";
  return os.str();
}

template <typename T>
T to_little_endian(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return v;
}

}  // namespace

VideoTensor::VideoTensor(VideoShape shape, int stride_level)
    : shape_(shape), stride_level_(stride_level), data_(shape.numel(), 0.0) {
  if (shape.numel() == 0) fail(ErrorKind::Shape, "video tensor with zero extent");
}

VideoTensor::VideoTensor(VideoShape shape, std::vector<double> data, int stride_level)
    : shape_(shape), stride_level_(stride_level), data_(std::move(data)) {
  if (shape.numel() == 0) fail(ErrorKind::Shape, "video tensor with zero extent");
  if (data_.size() != shape.numel()) {
    fail(ErrorKind::Shape, "data length does not match shape " + shape_str(shape));
  }
}

void require_same_shape(const VideoTensor& a, const VideoTensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    fail(ErrorKind::Shape, std::string(what) + ": shape mismatch " + shape_str(a.shape()) +
                               " vs " + shape_str(b.shape()));
  }
}

VideoTensor lincomb(double a, const VideoTensor& x, double b, const VideoTensor& y) {
  require_same_shape(x, y, "lincomb");
  VideoTensor out(x.shape(), x.stride_level());
  auto o = out.data();
  auto xs = x.data();
  auto ys = y.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = a * xs[i] + b * ys[i];
  return out;
}

VideoTensor scaled(double a, const VideoTensor& x) {
  VideoTensor out(x.shape(), x.stride_level());
  auto o = out.data();
  auto xs = x.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = a * xs[i];
  return out;
}

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

int log2_exact(std::size_t n) {
  if (!is_power_of_two(n)) fail(ErrorKind::Shape, "factor must be a power of two");
  return std::countr_zero(n);
}

VideoTensor down_temporal(const VideoTensor& x, std::size_t factor) {
  const int levels = log2_exact(factor);
  if (x.frames() % factor != 0) {
    fail(ErrorKind::Shape, "frame count " + std::to_string(x.frames()) +
                               " not divisible by " + std::to_string(factor));
  }
  VideoTensor out(x.shape().with_frames(x.frames() / factor), x.stride_level() + levels);
  for (std::size_t f = 0; f < out.frames(); ++f) {
    auto src = x.frame(f * factor);
    std::copy(src.begin(), src.end(), out.frame(f).begin());
  }
  return out;
}

VideoTensor up_temporal_nearest(const VideoTensor& x, std::size_t factor) {
  const int levels = log2_exact(factor);
  VideoTensor out(x.shape().with_frames(x.frames() * factor), x.stride_level() - levels);
  for (std::size_t f = 0; f < out.frames(); ++f) {
    auto src = x.frame(f / factor);
    std::copy(src.begin(), src.end(), out.frame(f).begin());
  }
  return out;
}

VideoTensor sample_gaussian(VideoShape shape, Rng& rng) {
  VideoTensor out(shape);
  for (double& v : out.data()) v = rng.normal();
  return out;
}

VideoTensor sample_gaussian(VideoShape shape, std::uint64_t seed) {
  Rng rng(seed);
  return sample_gaussian(shape, rng);
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(ErrorKind::Shape, "squared_distance: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

void write_raw(const std::filesystem::path& path, const VideoTensor& x) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  const auto& s = x.shape();
  const std::array<std::uint32_t, 4> dims{
      static_cast<std::uint32_t>(s.frames), static_cast<std::uint32_t>(s.channels),
      static_cast<std::uint32_t>(s.height), static_cast<std::uint32_t>(s.width)};
  for (auto d : dims) {
    auto le = to_little_endian(d);
    out.write(reinterpret_cast<const char*>(&le), sizeof(le));
  }
  std::vector<float> buf(x.size());
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = to_little_endian(static_cast<float>(x[i]));
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!out) fail(ErrorKind::Io, "failed writing " + path.string());
}

VideoTensor read_raw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  std::array<std::uint32_t, 4> dims{};
  for (auto& d : dims) {
    in.read(reinterpret_cast<char*>(&d), sizeof(d));
    d = to_little_endian(d);
  }
  if (!in) fail(ErrorKind::Io, "truncated header in " + path.string());
  VideoShape shape{dims[0], dims[1], dims[2], dims[3]};
  std::vector<float> buf(shape.numel());
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!in) fail(ErrorKind::Io, "truncated payload in " + path.string());
  std::vector<double> data(buf.size());
  for (std::size_t i = 0; i < buf.size(); ++i) data[i] = to_little_endian(buf[i]);
  return VideoTensor(shape, std::move(data));
}

}  // namespace tpd
