#include "tpd/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "tpd/error.hpp"

namespace tpd {

namespace {

constexpr char kMagic[8] = {'T', 'P', 'D', 'C', 'K', 'P', 'T', '1'};

static_assert(std::endian::native == std::endian::little, "little-endian host required");

}  // namespace

const std::string& Checkpoint::get(const std::string& key) const {
  auto it = metadata.find(key);
  if (it == metadata.end()) fail(ErrorKind::Io, "checkpoint lacks metadata key '" + key + "'");
  return it->second;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof(kMagic));
  const std::uint64_t n = ckpt.params.size();
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  out.write(reinterpret_cast<const char*>(ckpt.params.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
  for (const auto& [key, value] : ckpt.metadata) {
    if (key.find_first_of("=\n") != std::string::npos || value.find('\n') != std::string::npos) {
      fail(ErrorKind::Io, "checkpoint metadata must be single-line key=value");
    }
    out << key << '=' << value << '\n';
  }
  out.flush();
  if (!out) fail(ErrorKind::Io, "failed writing checkpoint " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot read checkpoint " + path.string());
  char magic[8];
  std::uint64_t n = 0;
  in.read(magic, sizeof(magic));
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    fail(ErrorKind::Io, "not a checkpoint: " + path.string());
  }
  if (n > (std::uint64_t{1} << 32)) fail(ErrorKind::Io, "implausible checkpoint size");
  Checkpoint ckpt;
  ckpt.params.resize(n);
  in.read(reinterpret_cast<char*>(ckpt.params.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) fail(ErrorKind::Io, "truncated checkpoint " + path.string());
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorKind::Io, "bad checkpoint metadata line");
    ckpt.metadata[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return ckpt;
}

}  // namespace tpd
