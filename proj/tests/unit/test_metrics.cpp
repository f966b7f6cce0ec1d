#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "tpd/error.hpp"
#include "tpd/metrics.hpp"
#include "tpd/rng.hpp"
#include "tpd/synthdata.hpp"
#include "tpd/toymodel.hpp"

using namespace tpd;

namespace {

std::vector<VideoTensor> gaussian_set(std::size_t n, double mean, Rng& rng) {
  std::vector<VideoTensor> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(VideoTensor({1, 1, 1, 1}, std::vector<double>{mean + rng.normal()}));
  return out;
}

// Direct V-statistic over all ordered pairs.
double energy_oracle(const std::vector<VideoTensor>& a, const std::vector<VideoTensor>& b) {
  auto mean_dist = [](const auto& x, const auto& y) {
    double s = 0.0;
    for (const auto& p : x) {
      for (const auto& q : y) s += std::sqrt(squared_distance(p.data(), q.data()));
    }
    return s / (static_cast<double>(x.size()) * static_cast<double>(y.size()));
  };
  return 2.0 * mean_dist(a, b) - mean_dist(a, a) - mean_dist(b, b);
}

}  // namespace

TEST_CASE("energy distance basics") {
  Rng rng(1);
  std::vector<VideoTensor> a;
  for (int i = 0; i < 30; ++i) a.push_back(sample_gaussian({2, 1, 2, 2}, rng));
  std::vector<VideoTensor> shuffled(a.rbegin(), a.rend());
  CHECK(std::abs(energy_distance(a, shuffled)) <= 1e-12);

  std::vector<VideoTensor> b;
  for (int i = 0; i < 25; ++i) b.push_back(lincomb(1.0, sample_gaussian({2, 1, 2, 2}, rng), 0.0, a[0]));
  for (auto& x : b) x[0] += 0.8;
  const double e = energy_distance(a, b);
  CHECK(e > 0.0);
  CHECK(e == energy_distance(b, a));
  CHECK(std::abs(e - energy_oracle(a, b)) < 1e-12);

  std::vector<VideoTensor> a2, b2;
  for (const auto& x : a) a2.push_back(scaled(2.0, x));
  for (const auto& x : b) b2.push_back(scaled(2.0, x));
  CHECK(std::abs(energy_distance(a2, b2) - 2.0 * e) < 1e-12);
}

TEST_CASE("shifted normals are separated by the permutation test") {
  Rng rng(2);
  auto a = gaussian_set(1000, 0.0, rng);
  auto b = gaussian_set(1000, 3.0, rng);
  Rng perm(3);
  auto test = energy_permutation_test(a, b, 100, perm);
  CHECK(test.statistic > 0.0);
  CHECK(test.statistic > test.null_q99);
  CHECK(test.p_value == doctest::Approx(1.0 / 101.0));
  CHECK(test.null_q95 <= test.null_q99);

  Rng again(3);
  auto same = energy_permutation_test(a, gaussian_set(1000, 0.0, rng), 100, again);
  CHECK(same.p_value > 0.01);
}

TEST_CASE("energy distance input errors") {
  std::vector<VideoTensor> empty;
  std::vector<VideoTensor> one{VideoTensor({1, 1, 1, 1}, std::vector<double>{0.0})};
  std::vector<VideoTensor> other{VideoTensor({2, 1, 1, 1}, std::vector<double>{0.0, 1.0})};
  try {
    energy_distance(empty, one);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Input);
  }
  CHECK_THROWS_AS(energy_distance(one, other), Error);
}

TEST_CASE("frame discontinuity metrics") {
  // Frames 0..3 hold 0, 0, 3, 3: a held pair followed by a jump.
  VideoTensor held({4, 1, 1, 1}, std::vector<double>{0.0, 0.0, 3.0, 3.0});
  CHECK(pair_seam_discontinuity(held) == 3.0);
  CHECK(adjacent_frame_difference(held) == 1.0);
  VideoTensor smooth({4, 1, 1, 1}, std::vector<double>{0.0, 1.0, 2.0, 3.0});
  CHECK(pair_seam_discontinuity(smooth) == 1.0);
  CHECK(adjacent_frame_difference(smooth) == 1.0);
  VideoTensor two({2, 1, 1, 1}, std::vector<double>{0.0, 5.0});
  CHECK(pair_seam_discontinuity(two) == 0.0);
}

TEST_CASE("nearest-neighbour frame error") {
  std::vector<VideoTensor> ref{VideoTensor({1, 1, 1, 2}, std::vector<double>{0.0, 0.0}), VideoTensor({1, 1, 1, 2}, std::vector<double>{4.0, 4.0})};
  std::vector<VideoTensor> gen{VideoTensor({1, 1, 1, 2}, std::vector<double>{1.0, 1.0}), VideoTensor({1, 1, 1, 2}, std::vector<double>{4.0, 2.0})};
  CHECK(per_frame_mse_to_nearest(gen, ref) == doctest::Approx((1.0 + 2.0) / 2.0));
}

TEST_CASE("convergence log cadence") {
  const auto path = std::filesystem::temp_directory_path() / "tpd_test_convergence.csv";
  {
    ConvergenceTracker tracker(path);
    ClipSpec spec;
    spec.frames = 4;
    spec.height = spec.width = 2;
    Dataset ds(spec, 4, 1);
    const auto fm = Schedule::flow_matching();
    const auto plan = StagePlan::uniform(fm, 1);
    ToyDenoiser m({4, 2, true}, 1);
    TrainState st(m.param_count());
    TrainConfig tc;
    tc.max_steps = 1000;
    tc.batch_size = 2;
    tc.eval_every = 100;
    train(m, st, ds, fm, plan, tc,
          [&](long step, double wall, double loss) { tracker.append(step, wall, loss, 0.0); });
    CHECK(tracker.rows() == 10);
    CHECK_THROWS_AS(tracker.append(1000, 1e9, 0.0, 0.0), Error);
  }
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "step,wall_seconds,loss,energy_distance");
  long prev_step = 0;
  double prev_wall = 0.0;
  int rows = 0;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string field;
    std::getline(ss, field, ',');
    const long step = std::stol(field);
    std::getline(ss, field, ',');
    const double wall = std::stod(field);
    CHECK(step == prev_step + 100);
    CHECK(wall >= prev_wall);
    prev_step = step;
    prev_wall = wall;
    ++rows;
  }
  CHECK(rows == 10);
  std::filesystem::remove(path);
}
