#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "tpd/config.hpp"
#include "tpd/error.hpp"
#include "tpd/metrics.hpp"
#include "tpd/verify.hpp"

namespace tpd {

/// Process exit codes shared by the CLI and the C API.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitNumerical = 3,
  kExitVerify = 4,
  kExitIo = 5,
};

int exit_code_for(ErrorKind kind);

const char* version_string();

struct TrainOutcome {
  TrainLog log;
  EvalReport eval;
  std::filesystem::path checkpoint;
};

TrainOutcome cmd_train(const RunConfig& config, const std::filesystem::path& out,
                       std::ostream& log);
void cmd_sample(const RunConfig& config, const std::filesystem::path& out, std::ostream& log);
EvalReport cmd_eval(const RunConfig& config, const std::filesystem::path& out, std::ostream& log);

/// Runs every property suite; writes verify.txt under `out`.
std::vector<SuiteResult> cmd_verify(const RunConfig& config, const std::filesystem::path& out,
                                    std::ostream& log);

struct ArmReport {
  std::string name;
  int stages = 1;
  bool align = true;
  long steps = 0;
  double train_seconds = 0.0;
  double final_loss = 0.0;
  double energy_distance = 0.0;
  double token_pair_ratio = 1.0;          // analytic, attention accounting
  double measured_pair_ratio = 1.0;       // from the training log
  double sample_seconds_per_clip = 0.0;   // total-step sampling latency
};

struct CompareReport {
  ArmReport a;
  ArmReport b;
  double latency_ratio = 1.0;   // a / b
  double energy_ratio = 1.0;    // a / b
  double arms_permutation_p = 1.0;
};

CompareReport cmd_compare(const RunConfig& config, const std::filesystem::path& out,
                          std::ostream& log);

/// Dispatches one CLI command; returns its exit code and never throws.
int run_command(const std::string& command, RunConfig config, const std::filesystem::path& out,
                std::optional<std::uint64_t> seed, std::ostream& log, std::string* error = nullptr);

}  // namespace tpd
