// Acceptance run: one PASS/FAIL line per criterion. Tolerances and budgets
// are fixed below. Usage: acceptance [out_dir] [criterion ...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <json.hpp>
#include <numeric>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "tpd/alignment.hpp"
#include "tpd/config.hpp"
#include "tpd/error.hpp"
#include "tpd/harness.hpp"
#include "tpd/rng.hpp"
#include "tpd/sampler.hpp"
#include "tpd/schedule.hpp"
#include "tpd/stagewise.hpp"
#include "tpd/verify.hpp"

using namespace tpd;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr double kIdentityTol = 1e-10;
constexpr double kQuadratureTol = 1e-8;
constexpr double kAssignmentTol = 1e-9;
constexpr int kMcDraws = 100000;
constexpr double kFaultScale = 1.05;
constexpr double kCostRatio = 0.4375;
constexpr double kMeasuredCostTol = 0.01;
constexpr long kCostSteps = 1000;
constexpr double kEnergyRatioMax = 1.1;
constexpr double kPairRatioMax = 0.5;
constexpr double kLatencyRatioMax = 1.0;
constexpr int kAblationSeeds = 3;

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json read_json(const fs::path& path) { return json::parse(slurp(path)); }

double max_abs_diff(const VideoTensor& a, const VideoTensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Frame f of x as a flat copy.
std::vector<double> frame(const VideoTensor& x, std::size_t f) {
  const std::size_t fs = x.frame_size();
  return {x.data().begin() + static_cast<std::ptrdiff_t>(f * fs),
          x.data().begin() + static_cast<std::ptrdiff_t>((f + 1) * fs)};
}

// Builds a clip at `frames` frames from a per-frame generator.
VideoTensor build(const VideoShape& full, std::size_t frames,
                  const std::function<std::vector<double>(std::size_t)>& make) {
  VideoTensor out(VideoShape{frames, full.channels, full.height, full.width});
  const std::size_t fs = out.frame_size();
  for (std::size_t f = 0; f < frames; ++f) {
    const auto v = make(f);
    std::copy(v.begin(), v.end(), out.data().begin() + static_cast<std::ptrdiff_t>(f * fs));
  }
  return out;
}

std::vector<double> mix(double a, const std::vector<double>& x, double b, const std::vector<double>& y) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = a * x[i] + b * y[i];
  return out;
}

// Random plan with interior starts so gamma > 0 at every stage start.
StagePlan interior_plan(const Schedule& schedule, int K, Rng& rng) {
  std::vector<double> starts(static_cast<std::size_t>(K));
  for (auto& s : starts) s = rng.uniform(0.05, 0.95);
  std::sort(starts.begin(), starts.end());
  for (std::size_t i = 1; i < starts.size(); ++i) starts[i] = std::max(starts[i], starts[i - 1] + 1e-3);
  std::vector<Stage> stages;
  for (int k = 1; k <= K; ++k) {
    Stage s;
    s.index = k;
    s.start = starts[static_cast<std::size_t>(k - 1)];
    s.end = k == 1 ? 0.0 : bridge_end_time(schedule, starts[static_cast<std::size_t>(k - 2)], -1.0);
    s.down_factor = std::size_t{1} << (k - 1);
    stages.push_back(s);
  }
  return StagePlan::from_stages(std::move(stages));
}

Outcome boundary_identities() {
  Rng rng(2024);
  const Schedule schedules[] = {Schedule::flow_matching(), Schedule::ddim_linear()};
  double worst_latent = 0.0, worst_end = 0.0, worst_eps = 0.0, worst_time = 0.0;
  int start_mismatch = 0, trials = 0, eps_trials = 0;

  // Uniform FM, K = 3: stage 2 ends at 1 / (1 + 2^1.5), stage 3 at 2 / (2 + sqrt 2).
  const StagePlan fm3 = StagePlan::uniform(schedules[0], 3);
  worst_time = std::max(std::abs(fm3.stage(2).end - 1.0 / (1.0 + std::pow(2.0, 1.5))),
                        std::abs(fm3.stage(3).end - 2.0 / (2.0 + std::sqrt(2.0))));

  for (const Schedule& schedule : schedules) {
    for (int trial = 0; trial < 1000; ++trial, ++trials) {
      const int K = rng.uniform_int(1, 4);
      const StagePlan plan = trial % 2 == 0 ? StagePlan::uniform(schedule, K) : interior_plan(schedule, K, rng);
      const int k = rng.uniform_int(1, K);
      const Stage& stage = plan.stage(k);
      const std::size_t d = stage.down_factor;
      const VideoShape full{(std::size_t{1} << K) * 2, 1, 2, 3};
      const VideoTensor x0 = sample_gaussian(full, rng);
      const VideoTensor eps = sample_gaussian(full, rng);
      const auto [gs, ss] = schedule.coefficients(stage.start);
      const auto [ge, se] = schedule.coefficients(stage.end);
      const std::size_t frames = full.frames / d;

      // Start content is the next-coarser rate held for two frames, except at
      // the coarsest stage, which starts from its own rate.
      const VideoTensor oracle_start = build(full, frames, [&](std::size_t f) {
        const std::size_t src = k == K ? f * d : (f / 2) * 2 * d;
        return mix(gs, frame(x0, src), ss, frame(eps, f * d));
      });
      const VideoTensor oracle_end = build(full, frames, [&](std::size_t f) {
        return mix(ge, frame(x0, f * d), se, frame(eps, f * d));
      });
      const auto latents = boundary_latents(schedule, plan, k, x0, eps);
      worst_latent = std::max({worst_latent, max_abs_diff(latents.start, oracle_start),
                               max_abs_diff(latents.end, oracle_end)});

      if (schedule.kind() == ScheduleKind::FlowMatching) {
        const auto at_start = fm_stage_sample(stage, latents.start, latents.end, stage.start);
        const auto at_end = fm_stage_sample(stage, latents.start, latents.end, stage.end);
        if (!(at_start.x_t == latents.start)) ++start_mismatch;
        worst_end = std::max(worst_end, max_abs_diff(at_end.x_t, latents.end));
      }
      // The constant-noise form needs gamma > 0 at the stage start.
      if (gs <= 0.0) continue;
      ++eps_trials;

      const VideoTensor eps_k = stage_epsilon(schedule, stage, latents.start, latents.end);
      if (!(intermediate_latent(schedule, stage, latents.start, eps_k, stage.start) == latents.start)) {
        ++start_mismatch;
      }
      worst_end = std::max(
          worst_end, max_abs_diff(intermediate_latent(schedule, stage, latents.start, eps_k, stage.end), latents.end));

      // Noise recovery on latents sharing one content term:
      // eps = (x_e - (g_e / g_s) x_s) / (s_e - g_e s_s / g_s).
      const VideoTensor noise = build(full, frames, [&](std::size_t f) { return frame(eps, f * d); });
      const VideoTensor content = build(full, frames, [&](std::size_t f) { return frame(x0, f * d); });
      const VideoTensor xs = lincomb(gs, content, ss, noise);
      const VideoTensor xe = lincomb(ge, content, se, noise);
      const VideoTensor recovered = stage_epsilon(schedule, stage, xs, xe);
      const double denom = se - ge * ss / gs;
      double by_hand = 0.0;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        by_hand = std::max(by_hand, std::abs((xe[i] - ge / gs * xs[i]) / denom - noise[i]));
      }
      worst_eps = std::max({worst_eps, max_abs_diff(recovered, noise), by_hand});
    }
  }

  VerifyOptions opt;
  opt.seed = 11;
  const SuiteResult suite = verify_boundary_identities(opt);
  Outcome o;
  o.passed = start_mismatch == 0 && worst_latent <= 1e-14 && worst_end <= kIdentityTol &&
             worst_eps <= kIdentityTol && worst_time <= 1e-15 && suite.passed;
  o.detail = std::to_string(trials) + " trials (" + std::to_string(eps_trials) +
             " with gamma > 0 at the start), start mismatches " + std::to_string(start_mismatch) +
             ", end error " + fmt(worst_end) + ", eps recovery error " + fmt(worst_eps) +
             ", latent construction error " + fmt(worst_latent) + ", bridge time error " +
             fmt(worst_time) + "; library suite: " + suite.detail;
  return o;
}

// RK4 on the probability-flow ODE with eps held constant. Flow matching is
// integrated in t (dx/dt = (eps - x) / (1 - t)); DDIM in lambda, where
// d(x / g)/dlambda = -exp(-lambda) eps.
VideoTensor rk4_oracle(const Schedule& schedule, const Stage& stage, const VideoTensor& xs,
                       const VideoTensor& eps, double t) {
  const int n = 4000;
  VideoTensor x = xs;
  if (schedule.kind() == ScheduleKind::FlowMatching) {
    const double h = (t - stage.start) / n;
    double u = stage.start;
    auto f = [&](const VideoTensor& y, double tt) { return scaled(1.0 / (1.0 - tt), lincomb(1.0, eps, -1.0, y)); };
    for (int i = 0; i < n; ++i, u = stage.start + i * h) {
      const auto k1 = f(x, u);
      const auto k2 = f(lincomb(1.0, x, h / 2, k1), u + h / 2);
      const auto k3 = f(lincomb(1.0, x, h / 2, k2), u + h / 2);
      const auto k4 = f(lincomb(1.0, x, h, k3), u + h);
      for (std::size_t j = 0; j < x.size(); ++j) x[j] += h / 6 * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j]);
    }
    return x;
  }
  const double l0 = schedule.log_snr(stage.start), l1 = schedule.log_snr(t);
  const double h = (l1 - l0) / n;
  double y = 0.0;  // integral of -exp(-lambda) from l0
  for (int i = 0; i < n; ++i) {
    const double l = l0 + i * h;
    const double k1 = -std::exp(-l), k2 = -std::exp(-(l + h / 2)), k4 = -std::exp(-(l + h));
    y += h / 6 * (k1 + 4 * k2 + k4);
  }
  const double gs = schedule.coefficients(stage.start).gamma;
  const double gt = schedule.coefficients(t).gamma;
  return lincomb(gt / gs, xs, gt * y, eps);
}

Outcome quadrature() {
  Rng rng(77);
  const Schedule schedules[] = {Schedule::flow_matching(), Schedule::ddim_linear()};
  double worst = 0.0;
  for (const Schedule& schedule : schedules) {
    for (int trial = 0; trial < 100; ++trial) {
      const int K = rng.uniform_int(1, 4);
      const StagePlan plan = interior_plan(schedule, K, rng);
      const Stage& stage = plan.stage(rng.uniform_int(1, K));
      const double t = stage.end + rng.uniform(0.05, 0.95) * stage.width();
      const VideoShape shape{4, 1, 2, 2};
      const VideoTensor xs = sample_gaussian(shape, rng);
      const VideoTensor eps = sample_gaussian(shape, rng);
      worst = std::max(worst, max_abs_diff(rk4_oracle(schedule, stage, xs, eps, t),
                                           intermediate_latent(schedule, stage, xs, eps, t)));
    }
  }
  VerifyOptions opt;
  opt.seed = 12;
  const SuiteResult suite = verify_quadrature(opt);
  return {worst <= kQuadratureTol && suite.passed,
          "200 draws, max |RK4 - closed form| " + fmt(worst) + "; Gauss-Kronrod suite: " + suite.detail};
}

Outcome assignment() {
  Rng rng(5150);
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    CostMatrix cost;
    cost.n = static_cast<std::size_t>(rng.uniform_int(1, 8));
    cost.values.resize(cost.n * cost.n);
    for (double& v : cost.values) v = trial % 2 == 0 ? rng.uniform() : rng.uniform_int(0, 2);
    std::vector<std::size_t> perm(cost.n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    double best = INFINITY;
    do {
      double c = 0.0;
      for (std::size_t i = 0; i < cost.n; ++i) c += cost(i, perm[i]);
      best = std::min(best, c);
    } while (std::next_permutation(perm.begin(), perm.end()));
    const auto res = linear_sum_assignment(cost);
    std::vector<char> used(cost.n, 0);
    double achieved = 0.0;
    bool valid = res.permutation.size() == cost.n;
    for (std::size_t i = 0; valid && i < cost.n; ++i) {
      valid = res.permutation[i] < cost.n && !used[res.permutation[i]];
      if (valid) used[res.permutation[i]] = 1, achieved += cost(i, res.permutation[i]);
    }
    if (!valid || std::abs(achieved - best) > kAssignmentTol) ++mismatches;
  }

  int worse = 0;
  for (int b = 0; b < 100; ++b) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(2, 24));
    const VideoShape shape{16, 1, 2, 2};
    std::vector<VideoTensor> xs, es;
    for (std::size_t i = 0; i < n; ++i) xs.push_back(sample_gaussian(shape, rng));
    for (std::size_t i = 0; i < n; ++i) es.push_back(sample_gaussian(shape, rng));
    const auto aligned = align_noise(xs, es);
    double identity = 0.0, matched = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < xs[i].size(); ++j) {
        identity += std::pow(xs[i][j] - es[i][j], 2);
        matched += std::pow(xs[i][j] - aligned[i][j], 2);
      }
    }
    if (matched > identity * (1 + 1e-12)) ++worse;
  }
  return {mismatches == 0 && worse == 0,
          std::to_string(mismatches) + "/1000 matrices differ from brute force, " + std::to_string(worse) +
              "/100 aligned batches costlier than identity pairing"};
}

Outcome renoise_covariance() {
  // Uniform FM, K = 3, leaving stage 3 for stage 2 (start 2/3).
  const Schedule fm = Schedule::flow_matching();
  const StagePlan plan = StagePlan::uniform(fm, 3);
  const RenoiseParams p = renoise_params(fm, plan, 3);
  const double coeff_err = std::max({std::abs(p.leave_gamma - (std::sqrt(2.0) - 1.0)),
                                     std::abs(p.noise_weight - std::sqrt(2.0) / 3.0),
                                     std::abs(p.scale - (1.0 / 3.0) / (std::sqrt(2.0) - 1.0)),
                                     std::abs(p.corr + 1.0)});

  VerifyOptions opt;
  opt.seed = 13;
  opt.mc_draws = kMcDraws;
  const SuiteResult clean = verify_renoise_covariance(opt);
  opt.renoise_scale_factor = kFaultScale;
  const SuiteResult fault = verify_renoise_covariance(opt);
  return {clean.passed && !fault.passed && coeff_err <= 1e-12,
          std::to_string(kMcDraws) + " draws per case: " + clean.detail + "; coefficient error " +
              fmt(coeff_err) + "; scale x" + fmt(kFaultScale) + " fault detected: " +
              (fault.passed ? "no" : "yes")};
}

Outcome gradients() {
  VerifyOptions opt;
  opt.seed = 14;
  const SuiteResult suite = verify_gradients(opt);
  return {suite.passed, suite.detail};
}

Outcome cost_accounting(const fs::path& out) {
  const AttentionCost cost = attention_cost_accounting(3, 16, 10);
  // (16^2 + 8^2 + 4^2) * 10 pairs against 3 * 16^2 * 10 at full rate.
  const bool counts = cost.total_token_pairs == 3360 && cost.full_rate_token_pairs == 7680;
  const bool analytic = std::abs(cost.ratio - kCostRatio) <= 1e-12;

  RunConfig c = parse_config("[train]\nsteps = " + std::to_string(kCostSteps) + "\neval_every = 0\n[eval]\nsamples = 16\n");
  std::ostringstream log;
  const TrainOutcome run = cmd_train(c, out / "cost", log);
  const double measured = run.log.attention_pair_ratio();
  const double rel = std::abs(measured / cost.ratio - 1.0);
  return {counts && analytic && rel <= kMeasuredCostTol,
          "analytic ratio " + fmt(cost.ratio, 10) + " (" + std::to_string(cost.total_token_pairs) + "/" +
              std::to_string(cost.full_rate_token_pairs) + " pairs), measured over " +
              std::to_string(run.log.steps) + " steps " + fmt(measured, 6) + " (relative error " + fmt(rel) + ")"};
}

Outcome comparison(const fs::path& out) {
  const RunConfig c = load_config(fs::path(TPD_SOURCE_DIR) / "configs" / "compare.ini");
  std::ostringstream log;
  const CompareReport r = cmd_compare(c, out / "compare", log);
  const double pair_ratio = r.a.measured_pair_ratio / r.b.measured_pair_ratio;
  const bool ok = r.energy_ratio <= kEnergyRatioMax && pair_ratio <= kPairRatioMax &&
                  r.latency_ratio < kLatencyRatioMax;
  return {ok, "budget " + fmt(c.compare_budget_seconds) + " s per arm; steps " + std::to_string(r.a.steps) +
                  " vs " + std::to_string(r.b.steps) + "; energy distance " + fmt(r.a.energy_distance) +
                  " vs " + fmt(r.b.energy_distance) + " (ratio " + fmt(r.energy_ratio) + ", limit " +
                  fmt(kEnergyRatioMax) + "); attention pair ratio " + fmt(pair_ratio) + " (limit " +
                  fmt(kPairRatioMax) + "); 30-step latency ratio " + fmt(r.latency_ratio) + " (speedup " +
                  fmt(1.0 / r.latency_ratio, 3) + "x)"};
}

Outcome ablation(const fs::path& out) {
  const RunConfig base = load_config(fs::path(TPD_SOURCE_DIR) / "configs" / "ablation.ini");
  double ed[2] = {0.0, 0.0};      // align on, off
  double seam[2] = {0.0, 0.0};    // renoise on, off
  std::ostringstream per_seed;
  for (int seed = 1; seed <= kAblationSeeds; ++seed) {
    for (int a = 0; a < 2; ++a) {
      RunConfig c = base;
      c.seed = static_cast<std::uint64_t>(seed);
      apply_setting(c, "train.align", a == 0 ? "true" : "false");
      const fs::path dir = out / "ablation" / ("seed" + std::to_string(seed) + (a == 0 ? "_align" : "_noalign"));
      std::ostringstream log;
      const TrainOutcome run = cmd_train(c, dir, log);
      ed[a] += run.eval.energy_distance / kAblationSeeds;
      per_seed << (a == 0 ? " seed " + std::to_string(seed) + " " : "/") << fmt(run.eval.energy_distance, 3);
      for (int rn = 0; rn < 2; ++rn) {
        apply_setting(c, "sample.renoise", rn == 0 ? "true" : "false");
        cmd_sample(c, dir, log);
        seam[rn] += read_json(dir / "samples" / "summary.json")["pair_seam_discontinuity"].get<double>() /
                    (2 * kAblationSeeds);
        fs::rename(dir / "samples", dir / (rn == 0 ? "samples_renoise" : "samples_no_renoise"));
      }
    }
  }
  const bool align_ok = ed[1] > ed[0];
  const bool renoise_ok = seam[1] > seam[0];
  return {align_ok && renoise_ok,
          "mean energy distance align on " + fmt(ed[0]) + " vs off " + fmt(ed[1]) + " (" +
              (align_ok ? "off worse" : "off not worse") + "; on/off" + per_seed.str() +
              "); mean pair-seam discontinuity renoise on " + fmt(seam[0]) + " vs off " + fmt(seam[1]) +
              " (" + (renoise_ok ? "off higher" : "off not higher") + ")"};
}

// Timing-only content is dropped before comparing runs.
std::string normalized(const fs::path& path) {
  const std::string name = path.filename().string();
  std::string text = slurp(path);
  if (name == "convergence.csv") {
    std::istringstream in(text);
    std::string line, outText;
    while (std::getline(in, line)) {
      const auto p = line.find(','), q = line.find(',', p + 1);
      outText += (p == std::string::npos ? line : line.substr(0, p) + line.substr(q)) + '\n';
    }
    return outText;
  }
  if (name == "compare.json") {
    json j = json::parse(text);
    for (const char* arm : {"a", "b"}) {
      j[arm].erase("train_seconds");
      j[arm].erase("sample_seconds_per_clip");
    }
    j.erase("latency_ratio");
    return j.dump();
  }
  if (name == "compare.txt") {
    std::istringstream in(text);
    std::string line, outText;
    while (std::getline(in, line)) {
      if (line.find("seconds") == std::string::npos && line.rfind("latency", 0) != 0) outText += line + '\n';
    }
    return outText;
  }
  if (name == "verify.txt") return std::regex_replace(text, std::regex(R"( \([0-9.e+-]+ s\))"), "");
  return text;
}

Outcome determinism(const fs::path& out) {
  const std::string text =
      "[data]\nclips = 64\n[train]\nsteps = 60\nbatch = 8\neval_every = 30\n[eval]\nsamples = 12\n"
      "[sample]\ncount = 4\nsnapshots = true\n[verify]\nmc_draws = 2000\n[compare]\nbudget_steps = 30\n"
      "[arm.a]\nplan.stages = 3\n[arm.b]\nplan.stages = 1\n";
  fs::path dirs[2] = {out / "determinism" / "run1", out / "determinism" / "run2"};
  for (const auto& dir : dirs) {
    fs::remove_all(dir);
    for (const char* cmd : {"train", "sample", "eval", "verify", "compare"}) {
      RunConfig c = parse_config(text);
      c.checkpoint = (dir / "train" / "model.ckpt").string();
      std::ostringstream log;
      std::string error;
      const int code = run_command(cmd, c, dir / cmd, 9, log, &error);
      // The verify suites run at low draw counts here and may legitimately fail.
      if (code != kExitOk && !(cmd == std::string("verify") && code == kExitVerify)) {
        return {false, std::string(cmd) + " failed: " + error};
      }
    }
  }
  std::size_t compared = 0, differing = 0, skipped = 0;
  std::string first_diff;
  for (const auto& entry : fs::recursive_directory_iterator(dirs[0])) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), dirs[0]);
    if (rel.filename() == "timing.json") {
      ++skipped;
      continue;
    }
    const fs::path other = dirs[1] / rel;
    ++compared;
    if (!fs::exists(other) || normalized(entry.path()) != normalized(other)) {
      ++differing;
      if (first_diff.empty()) first_diff = rel.string();
    }
  }
  return {differing == 0 && compared > 0,
          std::to_string(compared) + " files compared across train/sample/eval/verify/compare, " +
              std::to_string(differing) + " differ" + (first_diff.empty() ? "" : " (first: " + first_diff + ")") +
              ", " + std::to_string(skipped) + " timing files excluded"};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path out = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_runs");
  std::set<std::string> only(argv + std::min(argc, 2), argv + argc);
  fs::create_directories(out);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"boundary-identities", boundary_identities},
      {"quadrature-oracle", quadrature},
      {"assignment-optimality", assignment},
      {"renoise-covariance", renoise_covariance},
      {"gradient-check", gradients},
      {"cost-accounting", [&] { return cost_accounting(out); }},
      {"desk-comparison", [&] { return comparison(out); }},
      {"ablations", [&] { return ablation(out); }},
      {"determinism", [&] { return determinism(out); }},
  };

  std::ofstream report(out / "acceptance.txt");
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    if (!only.empty() && !only.count(name)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    char head[96];
    std::snprintf(head, sizeof(head), "%s %-22s [%7.1f s] ", o.passed ? "PASS" : "FAIL", name.c_str(), secs);
    std::cout << head << o.detail << std::endl;
    report << head << o.detail << '\n';
    if (!o.passed) ++failed;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
