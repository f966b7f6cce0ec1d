#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace tpd {

/// Checkpoint file: 8-byte magic "TPDCKPT1", uint64 LE parameter count, the
/// parameters as float64 LE, then a UTF-8 metadata block of `key=value` lines
/// running to end of file.
struct Checkpoint {
  std::vector<double> params;
  std::map<std::string, std::string> metadata;

  const std::string& get(const std::string& key) const;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace tpd
