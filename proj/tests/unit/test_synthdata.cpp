#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "tpd/error.hpp"
#include "tpd/metrics.hpp"
#include "tpd/rng.hpp"
#include "tpd/synthdata.hpp"

using namespace tpd;

TEST_CASE("zero velocity gives a static clip") {
  for (Motion motion : {Motion::Blob, Motion::Dot}) {
    ClipSpec spec;
    spec.motion = motion;
    spec.speed_min = spec.speed_max = 0.0;
    Rng rng(3);
    auto clip = generate_clip(spec, rng);
    for (std::size_t f = 1; f < clip.frames(); ++f) {
      for (std::size_t i = 0; i < clip.frame_size(); ++i) CHECK(clip.frame(f)[i] == clip.frame(0)[i]);
    }
  }
}

TEST_CASE("clips are seeded and bounded") {
  ClipSpec spec;
  spec.motion = Motion::Mixed;
  Rng a(5), b(5), c(6);
  auto x = generate_clip(spec, a);
  CHECK(x == generate_clip(spec, b));
  CHECK_FALSE(x == generate_clip(spec, c));
  Dataset ds(spec, 200, 1);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (double v : ds.clip(i).data()) {
      REQUIRE(v >= -1.0);
      REQUIRE(v <= 1.0);
    }
  }
}

TEST_CASE("dataset splits and seeding") {
  ClipSpec spec;
  Dataset ds(spec, 10, 9);
  CHECK(ds.train_indices() == std::vector<std::size_t>{0, 2, 4, 6, 8});
  CHECK(ds.heldout_indices() == std::vector<std::size_t>{1, 3, 5, 7, 9});
  CHECK(ds.heldout(3).size() == 3);
  Rng r(ds.clip_seed(4));
  CHECK(generate_clip(spec, r) == ds.clip(4));
  Dataset again(spec, 10, 9);
  for (std::size_t i = 0; i < 10; ++i) CHECK(again.clip(i) == ds.clip(i));

  Dataset one(spec, 1, 9);
  CHECK(one.train_indices() == std::vector<std::size_t>{0});
}

TEST_CASE("clip spec validation") {
  ClipSpec spec;
  spec.speed_min = 2.0;
  spec.speed_max = 1.0;
  CHECK_THROWS_AS(validate(spec), Error);
  ClipSpec dark;
  dark.intensity_max = 1.5;
  CHECK_THROWS_AS(validate(dark), Error);
  CHECK(parse_motion("dot") == Motion::Dot);
  CHECK_THROWS_AS(parse_motion("spiral"), Error);
}

TEST_CASE("train and held-out splits come from one distribution") {
  ClipSpec spec;
  Dataset ds(spec, 800, 7);
  std::vector<VideoTensor> train;
  for (std::size_t i : ds.train_indices()) train.push_back(ds.clip(i));
  auto held = ds.heldout(400);
  Rng rng(1);
  auto test = energy_permutation_test(train, held, 200, rng);
  CHECK(test.p_value > 0.01);
}

TEST_CASE("dataset dump") {
  const auto dir = std::filesystem::temp_directory_path() / "tpd_test_dump";
  std::filesystem::remove_all(dir);
  ClipSpec spec;
  Dataset ds(spec, 3, 2);
  dump_dataset(ds, dir);
  CHECK(std::filesystem::exists(dir / "clip_00002.raw"));
  std::ifstream index(dir / "index.txt");
  std::string line;
  int lines = 0;
  while (std::getline(index, line)) ++lines;
  CHECK(lines == 3);
  auto back = read_raw(dir / "clip_00001.raw");
  CHECK(back.shape() == ds.clip(1).shape());
  std::filesystem::remove_all(dir);
}
