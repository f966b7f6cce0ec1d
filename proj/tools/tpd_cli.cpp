#include <CLI11.hpp>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "tpd/tpd.h"

namespace {

void print_line(const char* line, void*) { std::printf("%s\n", line); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporal pyramid diffusion experiments"};
  app.set_version_flag("--version", std::string(tpd_version()));

  std::string command;
  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;

  app.add_option("command", command, "train | sample | eval | verify | compare")
      ->required()
      ->check(CLI::IsMember({"train", "sample", "eval", "verify", "compare"}));
  app.add_option("--config", config_path, "INI config file")->required()->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "output directory")->capture_default_str();
  app.add_option("--seed", seed, "override run.seed");
  app.add_option("--set", overrides, "section.key=value override, repeatable");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : TPD_ERR_CONFIG;
  }

  tpd_config* config = nullptr;
  if (tpd_config_load(config_path.c_str(), &config) != TPD_OK) {
    std::fprintf(stderr, "error: %s\n", tpd_last_error());
    return TPD_ERR_CONFIG;
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "error: --set expects key=value, got '%s'\n", o.c_str());
      tpd_config_free(config);
      return TPD_ERR_CONFIG;
    }
    const std::string key = o.substr(0, eq), value = o.substr(eq + 1);
    if (tpd_config_set(config, key.c_str(), value.c_str()) != TPD_OK) {
      std::fprintf(stderr, "error: %s\n", tpd_last_error());
      tpd_config_free(config);
      return TPD_ERR_CONFIG;
    }
  }

  const uint64_t seed_value = seed.value_or(0);
  const tpd_status status = tpd_run(command.c_str(), config, out_dir.c_str(),
                                    seed ? &seed_value : nullptr, print_line, nullptr);
  if (status != TPD_OK) std::fprintf(stderr, "error: %s\n", tpd_last_error());
  tpd_config_free(config);
  return status;
}
