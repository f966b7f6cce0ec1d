#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "tpd/schedule.hpp"
#include "tpd/synthdata.hpp"
#include "tpd/toymodel.hpp"

namespace tpd {

/// Everything a run needs. Loaded from an INI-style file (`[section]` headers,
/// `key = value` lines); each key is addressed as `section.key`.
struct RunConfig {
  std::string source_text;  // the config file verbatim, echoed into manifests

  std::uint64_t seed = 1;

  ScheduleKind schedule = ScheduleKind::FlowMatching;
  int ddim_steps = 1000;

  int stages = 3;
  double renoise_corr = -1.0;

  ClipSpec clip{};
  std::size_t clips = 2000;
  std::uint64_t data_seed = 7;
  bool dump_data = false;

  ModelConfig model{};
  TrainConfig train{};

  std::size_t eval_samples = 256;

  int sample_steps = 30;  // total solver steps, split evenly across stages
  bool renoise = true;
  std::size_t sample_count = 16;
  std::string checkpoint;  // defaults to <out>/model.ckpt
  bool snapshots = false;

  double compare_budget_seconds = 60.0;
  long compare_budget_steps = 0;  // > 0 switches compare to equal step budgets
  std::vector<std::pair<std::string, std::string>> arm_a;
  std::vector<std::pair<std::string, std::string>> arm_b;

  double verify_renoise_scale_factor = 1.0;
  int verify_mc_draws = 100000;

  int steps_per_stage() const;
};

/// Applies one `section.key = value` setting. Throws Config on unknown keys
/// or malformed values.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Cross-field checks (K >= 1, frame divisibility, step split).
void validate(const RunConfig& config);

/// `key = value` lines describing the effective configuration.
std::string describe(const RunConfig& config);

}  // namespace tpd
