#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "tpd/checkpoint.hpp"
#include "tpd/config.hpp"
#include "tpd/harness.hpp"

using namespace tpd;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

RunConfig tiny() {
  auto c = parse_config(
      "[data]\nclips = 24\n"
      "[model]\nwidth = 8\n"
      "[train]\nsteps = 40\nbatch = 4\neval_every = 20\n"
      "[eval]\nsamples = 6\n"
      "[sample]\ncount = 3\n");
  return c;
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("tpd_test_harness_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("exit code mapping") {
  CHECK(exit_code_for(ErrorKind::Config) == 2);
  CHECK(exit_code_for(ErrorKind::Domain) == 2);
  CHECK(exit_code_for(ErrorKind::Shape) == 2);
  CHECK(exit_code_for(ErrorKind::Numerical) == 3);
  CHECK(exit_code_for(ErrorKind::Verify) == 4);
  CHECK(exit_code_for(ErrorKind::Io) == 5);
  std::ostringstream log;
  std::string error;
  CHECK(run_command("dance", tiny(), scratch("bad"), std::nullopt, log, &error) == kExitConfig);
  CHECK(error.find("dance") != std::string::npos);
  auto c = tiny();
  c.checkpoint = "/nonexistent/model.ckpt";
  CHECK(run_command("sample", c, scratch("missing"), std::nullopt, log, &error) == kExitIo);
}

TEST_CASE("train, sample and eval are reproducible") {
  const auto a = scratch("a"), b = scratch("b");
  std::ostringstream log;
  for (const auto& dir : {a, b}) {
    REQUIRE(run_command("train", tiny(), dir, 5, log) == kExitOk);
    REQUIRE(run_command("sample", tiny(), dir, 5, log) == kExitOk);
    REQUIRE(run_command("eval", tiny(), dir, 5, log) == kExitOk);
  }
  for (const char* file : {"model.ckpt", "eval.json", "manifest.txt", "samples/sample_00002.raw",
                           "samples/index.txt", "samples/summary.json"}) {
    CAPTURE(file);
    REQUIRE(fs::exists(a / file));
    CHECK(slurp(a / file) == slurp(b / file));
  }
  CHECK(fs::exists(a / "timing.json"));

  const auto manifest = slurp(a / "manifest.txt");
  CHECK(manifest.find("command=eval") != std::string::npos);
  CHECK(manifest.find("seed=5\n") != std::string::npos);
  CHECK(manifest.find("[effective]") != std::string::npos);
  CHECK(manifest.find("[config]\n[data]\nclips = 24") != std::string::npos);

  auto ck = read_checkpoint(a / "model.ckpt");
  CHECK(ck.get("plan.stages") == "3");
  CHECK(ck.get("train.steps_done") == "40");

  // convergence.csv: header plus one row per eval; wall time aside, identical.
  std::istringstream ca(slurp(a / "convergence.csv")), cb(slurp(b / "convergence.csv"));
  std::string la, lb;
  int rows = 0;
  while (std::getline(ca, la) && std::getline(cb, lb)) {
    auto strip = [](const std::string& s) {
      const auto p = s.find(',');
      const auto q = s.find(',', p + 1);
      return p == std::string::npos ? s : s.substr(0, p) + s.substr(q);
    };
    CHECK(strip(la) == strip(lb));
    ++rows;
  }
  CHECK(rows == 3);
}

TEST_CASE("verify passes and a scaled renoise fails") {
  std::ostringstream log;
  auto c = tiny();
  c.verify_mc_draws = 100000;
  const auto dir = scratch("verify");
  CHECK(run_command("verify", c, dir, std::nullopt, log) == kExitOk);
  CHECK(slurp(dir / "verify.txt").find("FAIL") == std::string::npos);
  c.verify_renoise_scale_factor = 1.05;
  CHECK(run_command("verify", c, scratch("verify_fault"), std::nullopt, log) == kExitVerify);
}

TEST_CASE("compare runs both arms under one budget") {
  auto c = tiny();
  apply_setting(c, "compare.budget_steps", "30");
  apply_setting(c, "arm.b.plan.stages", "1");
  std::ostringstream log;
  const auto dir = scratch("compare");
  auto report = cmd_compare(c, dir, log);
  CHECK(report.a.steps == 30);
  CHECK(report.b.steps == 30);
  CHECK(report.a.stages == 3);
  CHECK(report.b.stages == 1);
  CHECK(report.a.token_pair_ratio == doctest::Approx(0.4375));
  CHECK(report.b.token_pair_ratio == 1.0);
  CHECK(fs::exists(dir / "compare.json"));
  CHECK(fs::exists(dir / "arm_a" / "model.ckpt"));

  apply_setting(c, "arm.a.data.clips", "5");
  CHECK(run_command("compare", c, scratch("compare_bad"), std::nullopt, log) == kExitConfig);
}
