#include "tpd/harness.hpp"

#include <algorithm>
#include <chrono>
#include <climits>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "tpd/checkpoint.hpp"
#include "tpd/error.hpp"
#include "tpd/sampler.hpp"
#include "tpd/stagewise.hpp"

#ifndef TPD_VERSION
#define TPD_VERSION "0.0.0"
#endif
#ifndef TPD_GIT_DESCRIBE
#define TPD_GIT_DESCRIBE "unknown"
#endif

namespace tpd {

namespace fs = std::filesystem;
using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

constexpr std::uint64_t kModelStream = 11;
constexpr std::uint64_t kTrainStream = 12;
constexpr std::uint64_t kPermutationStream = 13;
constexpr std::uint64_t kSampleStream = 1000;
constexpr int kPermutations = 200;
constexpr std::size_t kLatencyClips = 64;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create directory " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << text;
  out.flush();
  if (!out) fail(ErrorKind::Io, "failed writing " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

Schedule make_schedule(const RunConfig& c) {
  return c.schedule == ScheduleKind::FlowMatching ? Schedule::flow_matching()
                                                  : Schedule::ddim_linear(c.ddim_steps);
}

StagePlan make_plan(const Schedule& schedule, const RunConfig& c) {
  return StagePlan::uniform(schedule, c.stages, c.renoise_corr);
}

std::uint64_t sample_seed(const RunConfig& c, std::size_t i) {
  return derive_seed(c.seed, kSampleStream + i);
}

void write_manifest(const fs::path& out, const std::string& command, const RunConfig& c) {
  std::ostringstream os;
  os << "version=" << version_string() << '\n'
     << "command=" << command << '\n'
     << "seed=" << c.seed << '\n'
     << "model_seed=" << derive_seed(c.seed, kModelStream) << '\n'
     << "train_seed=" << derive_seed(c.seed, kTrainStream) << '\n'
     << "sample_seed_rule=derive_seed(seed, " << kSampleStream << " + i)\n"
     << "data_seed=" << c.data_seed << '\n'
     << "\n[effective]\n"
     << describe(c) << "\n[config]\n"
     << c.source_text;
  if (!c.source_text.empty() && c.source_text.back() != '\n') os << '\n';
  write_text(out / "manifest.txt", os.str());
}

Checkpoint make_checkpoint(const ToyDenoiser& model, const RunConfig& c, long steps) {
  Checkpoint ck;
  ck.params.assign(model.params().begin(), model.params().end());
  auto& m = ck.metadata;
  m["version"] = version_string();
  m["schedule.kind"] = to_string(c.schedule);
  m["schedule.ddim_steps"] = std::to_string(c.ddim_steps);
  m["plan.stages"] = std::to_string(c.stages);
  std::ostringstream corr;
  corr.precision(17);
  corr << c.renoise_corr;
  m["plan.renoise_corr"] = corr.str();
  m["model.width"] = std::to_string(c.model.width);
  m["model.positional"] = c.model.positional ? "true" : "false";
  m["data.frames"] = std::to_string(c.clip.frames);
  m["data.channels"] = std::to_string(c.clip.channels);
  m["data.height"] = std::to_string(c.clip.height);
  m["data.width"] = std::to_string(c.clip.width);
  m["run.seed"] = std::to_string(c.seed);
  m["train.steps_done"] = std::to_string(steps);
  return ck;
}

// Reads a checkpoint and rebinds the model-defining settings of `c` to it.
ToyDenoiser load_model(const fs::path& path, RunConfig& c) {
  const Checkpoint ck = read_checkpoint(path);
  for (const char* key : {"schedule.kind", "schedule.ddim_steps", "plan.stages", "plan.renoise_corr",
                          "model.width", "model.positional", "data.frames", "data.channels",
                          "data.height", "data.width"}) {
    apply_setting(c, key, ck.get(key));
  }
  ToyDenoiser model(c.model, 0);
  if (model.param_count() != ck.params.size()) {
    fail(ErrorKind::Io, "checkpoint parameter count does not match its model settings");
  }
  std::copy(ck.params.begin(), ck.params.end(), model.params().begin());
  return model;
}

fs::path checkpoint_path(const RunConfig& c, const fs::path& out) {
  return c.checkpoint.empty() ? out / "model.ckpt" : fs::path(c.checkpoint);
}

std::vector<VideoTensor> generate(const ToyDenoiser& model, const Schedule& schedule,
                                  const StagePlan& plan, const RunConfig& c, std::size_t count,
                                  bool renoise = true) {
  const Denoiser den = stage_denoiser(model, schedule, plan);
  std::vector<VideoTensor> clips;
  clips.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    SamplerConfig sc;
    sc.steps_per_stage = c.steps_per_stage();
    sc.seed = sample_seed(c, i);
    sc.renoise = renoise;
    clips.push_back(sample_video(schedule, plan, den, sc, c.clip.shape()));
  }
  return clips;
}

// Best of three passes over a fixed set of sampler seeds.
double sampling_latency(const ToyDenoiser& model, const Schedule& schedule, const StagePlan& plan,
                        const RunConfig& c) {
  double best = INFINITY;
  for (int rep = 0; rep < 3; ++rep) {
    const auto t0 = Clock::now();
    auto clips = generate(model, schedule, plan, c, kLatencyClips);
    best = std::min(best, seconds_since(t0) / static_cast<double>(clips.size()));
  }
  return best;
}

double tail_mean(const std::vector<double>& v, std::size_t n) {
  if (v.empty()) return 0.0;
  const std::size_t m = std::min(n, v.size());
  double s = 0.0;
  for (std::size_t i = v.size() - m; i < v.size(); ++i) s += v[i];
  return s / static_cast<double>(m);
}

}  // namespace

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Numerical:
      return kExitNumerical;
    case ErrorKind::Verify:
      return kExitVerify;
    case ErrorKind::Io:
      return kExitIo;
    case ErrorKind::Config:
    case ErrorKind::Domain:
    case ErrorKind::Shape:
    case ErrorKind::Input:
    case ErrorKind::StageWidth:
    case ErrorKind::Endpoint:
      return kExitConfig;
  }
  return kExitFailure;
}

const char* version_string() { return TPD_VERSION " (" TPD_GIT_DESCRIBE ")"; }

TrainOutcome cmd_train(const RunConfig& config, const fs::path& out, std::ostream& log) {
  validate(config);
  ensure_dir(out);
  write_manifest(out, "train", config);

  const Dataset dataset(config.clip, config.clips, config.data_seed);
  if (config.dump_data) dump_dataset(dataset, out / "data");
  const Schedule schedule = make_schedule(config);
  const StagePlan plan = make_plan(schedule, config);
  const auto held = dataset.heldout(config.eval_samples);

  ToyDenoiser model(config.model, derive_seed(config.seed, kModelStream));
  TrainState state(model.param_count());
  TrainConfig tc = config.train;
  tc.seed = derive_seed(config.seed, kTrainStream);

  ConvergenceTracker tracker(out / "convergence.csv");
  long last_logged = -1;
  auto hook = [&](long step, double wall, double loss) {
    const auto gen = generate(model, schedule, plan, config, config.eval_samples);
    const double ed = energy_distance(gen, held);
    tracker.append(step, wall, loss, ed);
    last_logged = step;
    log << "step " << step << " loss " << loss << " energy_distance " << ed << '\n';
  };

  log << "training K=" << config.stages << " " << to_string(config.schedule)
      << (config.train.align ? " aligned" : " unaligned") << '\n';
  TrainLog tlog = train(model, state, dataset, schedule, plan, tc, hook);

  const auto t0 = Clock::now();
  const auto gen = generate(model, schedule, plan, config, config.eval_samples);
  const double sample_seconds = seconds_since(t0) / static_cast<double>(gen.size());

  TrainOutcome outcome;
  outcome.log = tlog;
  outcome.eval.energy_distance = energy_distance(gen, held);
  outcome.eval.per_frame_mse_to_nearest = per_frame_mse_to_nearest(gen, held);
  outcome.eval.wall_time_train = tlog.train_seconds;
  outcome.eval.wall_time_sample = sample_seconds;
  outcome.eval.token_pair_ratio =
      attention_cost_accounting(plan, config.clip.frames, config.steps_per_stage()).ratio;
  const double final_loss = tlog.loss.empty() ? 0.0 : tlog.loss.back();
  if (last_logged != tlog.steps) {
    tracker.append(tlog.steps, tlog.train_seconds, final_loss, outcome.eval.energy_distance);
  }

  outcome.checkpoint = out / "model.ckpt";
  write_checkpoint(outcome.checkpoint, make_checkpoint(model, config, tlog.steps));

  json ev;
  ev["energy_distance"] = outcome.eval.energy_distance;
  ev["per_frame_mse_to_nearest"] = outcome.eval.per_frame_mse_to_nearest;
  ev["token_pair_ratio"] = outcome.eval.token_pair_ratio;
  ev["measured_attention_pair_ratio"] = tlog.attention_pair_ratio();
  ev["measured_token_ratio"] = tlog.token_ratio();
  ev["steps"] = tlog.steps;
  ev["final_loss"] = final_loss;
  ev["stage_counts"] = tlog.stage_counts;
  ev["eval_samples"] = gen.size();
  write_json(out / "eval.json", ev);
  write_json(out / "timing.json",
             {{"wall_time_train", tlog.train_seconds}, {"wall_time_sample", sample_seconds}});

  log << "trained " << tlog.steps << " steps in " << tlog.train_seconds << " s, energy distance "
      << outcome.eval.energy_distance << '\n';
  return outcome;
}

void cmd_sample(const RunConfig& config, const fs::path& out, std::ostream& log) {
  RunConfig c = config;
  ToyDenoiser model = load_model(checkpoint_path(config, out), c);
  validate(c);
  ensure_dir(out / "samples");
  write_manifest(out, "sample", c);
  const Schedule schedule = make_schedule(c);
  const StagePlan plan = make_plan(schedule, c);
  const Denoiser den = stage_denoiser(model, schedule, plan);

  std::ostringstream index;
  double seam = 0.0, adjacent = 0.0;
  for (std::size_t i = 0; i < c.sample_count; ++i) {
    SamplerConfig sc;
    sc.steps_per_stage = c.steps_per_stage();
    sc.seed = sample_seed(c, i);
    sc.renoise = c.renoise;
    if (c.snapshots && i == 0) {
      ensure_dir(out / "samples" / "snapshots");
      sc.snapshot = [&](int stage, int step, double, const VideoTensor& x) {
        char name[64];
        std::snprintf(name, sizeof(name), "stage%d_step%03d.raw", stage, step);
        write_raw(out / "samples" / "snapshots" / name, x);
      };
    }
    VideoTensor clip = sample_video(schedule, plan, den, sc, c.clip.shape());
    char name[32];
    std::snprintf(name, sizeof(name), "sample_%05zu.raw", i);
    write_raw(out / "samples" / name, clip);
    index << name << ' ' << sc.seed << ' ' << clip.frames() << ' ' << c.clip.channels << ' '
          << c.clip.height << ' ' << c.clip.width << '\n';
    seam += pair_seam_discontinuity(clip);
    adjacent += adjacent_frame_difference(clip);
  }
  write_text(out / "samples" / "index.txt", index.str());
  const double n = static_cast<double>(std::max<std::size_t>(c.sample_count, 1));
  write_json(out / "samples" / "summary.json", {{"count", c.sample_count},
                                                {"renoise", c.renoise},
                                                {"pair_seam_discontinuity", seam / n},
                                                {"adjacent_frame_difference", adjacent / n}});
  log << "wrote " << c.sample_count << " samples to " << (out / "samples").string() << '\n';
}

EvalReport cmd_eval(const RunConfig& config, const fs::path& out, std::ostream& log) {
  RunConfig c = config;
  ToyDenoiser model = load_model(checkpoint_path(config, out), c);
  validate(c);
  ensure_dir(out);
  write_manifest(out, "eval", c);
  const Schedule schedule = make_schedule(c);
  const StagePlan plan = make_plan(schedule, c);
  const Dataset dataset(c.clip, c.clips, c.data_seed);
  const auto held = dataset.heldout(c.eval_samples);

  const auto t0 = Clock::now();
  const auto gen = generate(model, schedule, plan, c, c.eval_samples, c.renoise);
  EvalReport report;
  report.wall_time_sample = seconds_since(t0) / static_cast<double>(gen.size());
  report.energy_distance = energy_distance(gen, held);
  report.per_frame_mse_to_nearest = per_frame_mse_to_nearest(gen, held);
  report.token_pair_ratio = attention_cost_accounting(plan, c.clip.frames, c.steps_per_stage()).ratio;
  Rng perm_rng(derive_seed(c.seed, kPermutationStream));
  const PermutationTest test = energy_permutation_test(gen, held, kPermutations, perm_rng);

  double seam = 0.0;
  for (const auto& g : gen) seam += pair_seam_discontinuity(g);
  write_json(out / "eval.json", {{"energy_distance", report.energy_distance},
                                 {"per_frame_mse_to_nearest", report.per_frame_mse_to_nearest},
                                 {"token_pair_ratio", report.token_pair_ratio},
                                 {"permutation_p_value", test.p_value},
                                 {"permutation_null_q95", test.null_q95},
                                 {"pair_seam_discontinuity", seam / static_cast<double>(gen.size())},
                                 {"eval_samples", gen.size()}});
  write_json(out / "timing.json", {{"wall_time_sample", report.wall_time_sample}});
  log << "energy distance " << report.energy_distance << " (permutation p " << test.p_value << ")\n";
  return report;
}

std::vector<SuiteResult> cmd_verify(const RunConfig& config, const fs::path& out, std::ostream& log) {
  ensure_dir(out);
  write_manifest(out, "verify", config);
  VerifyOptions opt;
  opt.seed = config.seed;
  opt.mc_draws = config.verify_mc_draws;
  opt.renoise_scale_factor = config.verify_renoise_scale_factor;
  std::ostringstream report;
  auto results = run_verify_suites(opt, report);
  log << report.str();
  write_text(out / "verify.txt", report.str());
  return results;
}

CompareReport cmd_compare(const RunConfig& config, const fs::path& out, std::ostream& log) {
  validate(config);
  ensure_dir(out);
  write_manifest(out, "compare", config);

  auto arm_config = [&](const std::vector<std::pair<std::string, std::string>>& overrides) {
    RunConfig c = config;
    for (const auto& [key, value] : overrides) {
      for (const char* shared : {"data.", "eval.", "compare.", "arm."}) {
        if (key.rfind(shared, 0) == 0) {
          fail(ErrorKind::Config, "arm override '" + key + "' would break the shared protocol");
        }
      }
      apply_setting(c, key, value);
    }
    if (config.compare_budget_steps > 0) {
      c.train.max_steps = config.compare_budget_steps;
      c.train.budget_seconds = 0.0;
    } else {
      c.train.max_steps = LONG_MAX;
      c.train.budget_seconds = config.compare_budget_seconds;
    }
    validate(c);
    return c;
  };
  const RunConfig configs[2] = {arm_config(config.arm_a), arm_config(config.arm_b)};
  const char* names[2] = {"a", "b"};

  ArmReport arms[2];
  for (int i = 0; i < 2; ++i) {
    log << "arm " << names[i] << ":\n";
    const TrainOutcome o = cmd_train(configs[i], out / (std::string("arm_") + names[i]), log);
    ArmReport& r = arms[i];
    r.name = names[i];
    r.stages = configs[i].stages;
    r.align = configs[i].train.align;
    r.steps = o.log.steps;
    r.train_seconds = o.log.train_seconds;
    r.final_loss = tail_mean(o.log.loss, 50);
    r.energy_distance = o.eval.energy_distance;
    r.token_pair_ratio = o.eval.token_pair_ratio;
    r.measured_pair_ratio = o.log.attention_pair_ratio();
  }

  // Latency and the arm-vs-arm test run after both arms have trained, with
  // measurements interleaved so neither arm sees a quieter machine.
  RunConfig loaded[2] = {configs[0], configs[1]};
  std::vector<ToyDenoiser> models;
  for (int i = 0; i < 2; ++i) {
    models.push_back(load_model(out / (std::string("arm_") + names[i]) / "model.ckpt", loaded[i]));
  }
  const Schedule schedules[2] = {make_schedule(loaded[0]), make_schedule(loaded[1])};
  const StagePlan plans[2] = {make_plan(schedules[0], loaded[0]), make_plan(schedules[1], loaded[1])};
  double best[2] = {INFINITY, INFINITY};
  for (int rep = 0; rep < 2; ++rep) {
    for (int i = 0; i < 2; ++i) {
      best[i] = std::min(best[i], sampling_latency(models[i], schedules[i], plans[i], loaded[i]));
    }
  }
  arms[0].sample_seconds_per_clip = best[0];
  arms[1].sample_seconds_per_clip = best[1];

  std::vector<VideoTensor> gen[2];
  for (int i = 0; i < 2; ++i) {
    gen[i] = generate(models[static_cast<std::size_t>(i)], schedules[i], plans[i], loaded[i],
                      config.eval_samples);
  }
  Rng perm_rng(derive_seed(config.seed, kPermutationStream));
  const PermutationTest aa = energy_permutation_test(gen[0], gen[1], kPermutations, perm_rng);

  CompareReport report;
  report.a = arms[0];
  report.b = arms[1];
  report.latency_ratio = arms[0].sample_seconds_per_clip / arms[1].sample_seconds_per_clip;
  report.energy_ratio = arms[1].energy_distance > 0.0
                            ? arms[0].energy_distance / arms[1].energy_distance
                            : (arms[0].energy_distance > 0.0 ? INFINITY : 1.0);
  report.arms_permutation_p = aa.p_value;

  auto arm_json = [](const ArmReport& r) {
    return json{{"name", r.name},
                {"stages", r.stages},
                {"align", r.align},
                {"steps", r.steps},
                {"train_seconds", r.train_seconds},
                {"final_loss", r.final_loss},
                {"energy_distance", r.energy_distance},
                {"token_pair_ratio", r.token_pair_ratio},
                {"measured_pair_ratio", r.measured_pair_ratio},
                {"sample_seconds_per_clip", r.sample_seconds_per_clip}};
  };
  write_json(out / "compare.json", {{"a", arm_json(report.a)},
                                    {"b", arm_json(report.b)},
                                    {"latency_ratio", report.latency_ratio},
                                    {"energy_ratio", report.energy_ratio},
                                    {"arms_permutation_p", report.arms_permutation_p},
                                    {"budget_seconds", config.compare_budget_steps > 0
                                                           ? 0.0
                                                           : config.compare_budget_seconds},
                                    {"budget_steps", config.compare_budget_steps}});

  std::ostringstream txt;
  char line[256];
  std::snprintf(line, sizeof(line), "%-28s %14s %14s\n", "", "arm a", "arm b");
  txt << line;
  auto row = [&](const char* label, double a, double b) {
    std::snprintf(line, sizeof(line), "%-28s %14.6g %14.6g\n", label, a, b);
    txt << line;
  };
  row("stages", report.a.stages, report.b.stages);
  row("align", report.a.align, report.b.align);
  row("train steps", static_cast<double>(report.a.steps), static_cast<double>(report.b.steps));
  row("train seconds", report.a.train_seconds, report.b.train_seconds);
  row("final loss (last 50)", report.a.final_loss, report.b.final_loss);
  row("energy distance", report.a.energy_distance, report.b.energy_distance);
  row("token pair ratio", report.a.token_pair_ratio, report.b.token_pair_ratio);
  row("measured pair ratio", report.a.measured_pair_ratio, report.b.measured_pair_ratio);
  row("sample seconds per clip", report.a.sample_seconds_per_clip, report.b.sample_seconds_per_clip);
  txt << "latency ratio a/b " << report.latency_ratio << "\nenergy ratio a/b " << report.energy_ratio
      << "\narm-vs-arm permutation p " << report.arms_permutation_p << '\n';
  write_text(out / "compare.txt", txt.str());
  log << txt.str();
  return report;
}

int run_command(const std::string& command, RunConfig config, const fs::path& out,
                std::optional<std::uint64_t> seed, std::ostream& log, std::string* error) {
  auto report = [&](const std::string& msg) {
    if (error != nullptr) *error = msg;
  };
  try {
    if (seed) config.seed = *seed;
    if (const char* env = std::getenv("TPD_NUM_THREADS"); env != nullptr && *env != '\0') {
      apply_setting(config, "train.threads", env);
    }
    if (command == "train") {
      cmd_train(config, out, log);
    } else if (command == "sample") {
      cmd_sample(config, out, log);
    } else if (command == "eval") {
      cmd_eval(config, out, log);
    } else if (command == "verify") {
      const auto results = cmd_verify(config, out, log);
      const auto failed = std::count_if(results.begin(), results.end(),
                                        [](const SuiteResult& r) { return !r.passed; });
      if (failed > 0) {
        report(std::to_string(failed) + " verification suite(s) failed");
        return kExitVerify;
      }
    } else if (command == "compare") {
      cmd_compare(config, out, log);
    } else {
      report("unknown command '" + command + "'");
      return kExitConfig;
    }
  } catch (const Error& e) {
    report(e.what());
    return exit_code_for(e.kind());
  } catch (const fs::filesystem_error& e) {
    report(e.what());
    return kExitIo;
  } catch (const std::exception& e) {
    report(e.what());
    return kExitFailure;
  }
  report("");
  return kExitOk;
}

}  // namespace tpd
