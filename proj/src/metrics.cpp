#include "tpd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>

#include "tpd/error.hpp"

namespace tpd {

namespace {

void check_sets(std::span<const VideoTensor> a, std::span<const VideoTensor> b) {
  if (a.empty() || b.empty()) fail(ErrorKind::Input, "energy distance needs non-empty sets");
  const VideoShape shape = a.front().shape();
  for (const auto& x : a) {
    if (x.shape() != shape) fail(ErrorKind::Shape, "energy distance: clip shapes differ");
  }
  for (const auto& x : b) {
    if (x.shape() != shape) fail(ErrorKind::Shape, "energy distance: clip shapes differ");
  }
}

double dist(const VideoTensor& a, const VideoTensor& b) {
  return std::sqrt(squared_distance(a.data(), b.data()));
}

double mean_within(std::span<const VideoTensor> s) {
  double acc = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = i + 1; j < s.size(); ++j) acc += dist(s[i], s[j]);
  }
  return 2.0 * acc / (static_cast<double>(s.size()) * static_cast<double>(s.size()));
}

// Canonical order of two sets so E(A, B) and E(B, A) run the same arithmetic.
bool ordered_before(std::span<const VideoTensor> a, std::span<const VideoTensor> b) {
  if (a.size() != b.size()) return a.size() < b.size();
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto da = a[i].data();
    auto db = b[i].data();
    auto [ia, ib] = std::mismatch(da.begin(), da.end(), db.begin());
    if (ia != da.end()) return *ia < *ib;
  }
  return true;
}

}  // namespace

double energy_distance(std::span<const VideoTensor> a, std::span<const VideoTensor> b) {
  check_sets(a, b);
  if (!ordered_before(a, b)) std::swap(a, b);
  double cross = 0.0;
  for (const auto& x : a) {
    for (const auto& y : b) cross += dist(x, y);
  }
  cross /= static_cast<double>(a.size()) * static_cast<double>(b.size());
  const double e = 2.0 * cross - mean_within(a) - mean_within(b);
  // The V-statistic is a squared MMD and non-negative; clamp round-off only.
  return std::max(0.0, e);
}

PermutationTest energy_permutation_test(std::span<const VideoTensor> a,
                                        std::span<const VideoTensor> b, int permutations,
                                        Rng& rng) {
  check_sets(a, b);
  if (permutations < 1) fail(ErrorKind::Input, "permutation count must be positive");
  const std::size_t na = a.size(), n = a.size() + b.size();
  std::vector<const VideoTensor*> pooled;
  for (const auto& x : a) pooled.push_back(&x);
  for (const auto& x : b) pooled.push_back(&x);
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) d[i * n + j] = d[j * n + i] = dist(*pooled[i], *pooled[j]);
  }

  auto statistic = [&](const std::vector<std::size_t>& idx) {
    const double nb = static_cast<double>(n - na);
    double aa = 0.0, bb = 0.0, ab = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double v = d[idx[i] * n + idx[j]];
        const bool ia = i < na, ja = j < na;
        if (ia && ja) aa += v;
        else if (!ia && !ja) bb += v;
        else if (ia) ab += v;
      }
    }
    const double fa = static_cast<double>(na);
    return 2.0 * ab / (fa * nb) - aa / (fa * fa) - bb / (nb * nb);
  };

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  PermutationTest result;
  result.statistic = statistic(idx);
  std::vector<double> null(static_cast<std::size_t>(permutations));
  int exceed = 0;
  for (int p = 0; p < permutations; ++p) {
    std::shuffle(idx.begin(), idx.end(), rng.engine());
    null[static_cast<std::size_t>(p)] = statistic(idx);
    if (null[static_cast<std::size_t>(p)] >= result.statistic) ++exceed;
  }
  std::sort(null.begin(), null.end());
  auto quantile = [&](double q) {
    const auto i = static_cast<std::size_t>(std::ceil(q * static_cast<double>(null.size()))) - 1;
    return null[std::min(i, null.size() - 1)];
  };
  result.null_q95 = quantile(0.95);
  result.null_q99 = quantile(0.99);
  result.p_value = (1.0 + exceed) / (1.0 + permutations);
  return result;
}

double pair_seam_discontinuity(const VideoTensor& clip) {
  if (clip.frames() < 3) return 0.0;
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t f = 1; f + 1 < clip.frames(); f += 2) {
    auto a = clip.frame(f);
    auto b = clip.frame(f + 1);
    for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
    count += a.size();
  }
  return acc / static_cast<double>(count);
}

double adjacent_frame_difference(const VideoTensor& clip) {
  if (clip.frames() < 2) return 0.0;
  double acc = 0.0;
  for (std::size_t f = 0; f + 1 < clip.frames(); ++f) {
    auto a = clip.frame(f);
    auto b = clip.frame(f + 1);
    for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
  }
  return acc / static_cast<double>((clip.frames() - 1) * clip.frame_size());
}

double per_frame_mse_to_nearest(std::span<const VideoTensor> generated,
                                std::span<const VideoTensor> reference) {
  check_sets(generated, reference);
  double acc = 0.0;
  for (const auto& g : generated) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& r : reference) best = std::min(best, squared_distance(g.data(), r.data()));
    acc += best / static_cast<double>(g.size());
  }
  return acc / static_cast<double>(generated.size());
}

ConvergenceTracker::ConvergenceTracker(const std::filesystem::path& path)
    : out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) fail(ErrorKind::Io, "cannot open " + path.string());
  out_ << "step,wall_seconds,loss,energy_distance\n" << std::flush;
  if (!out_) fail(ErrorKind::Io, "failed writing " + path.string());
}

void ConvergenceTracker::append(long step, double wall_seconds, double loss,
                                double energy_distance) {
  if (step <= last_step_) fail(ErrorKind::Input, "convergence rows need increasing steps");
  if (wall_seconds < last_wall_) fail(ErrorKind::Input, "wall_seconds went backwards");
  out_ << step << ',' << std::setprecision(9) << wall_seconds << ',' << std::setprecision(17)
       << loss << ',' << energy_distance << '\n'
       << std::flush;
  if (!out_) fail(ErrorKind::Io, "failed appending convergence row");
  last_step_ = step;
  last_wall_ = wall_seconds;
  ++rows_;
}

}  // namespace tpd
