#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tot {

struct ManifestInput {
  std::string path;
  std::uint64_t bytes = 0;
  std::string fingerprint;  // 64-bit content hash, hex
};

ManifestInput fingerprint_file(const std::string& path);

// Provenance record written next to every command's outputs.
struct RunManifest {
  std::string subcommand;
  std::uint64_t seed = 0;
  std::string config_json;  // resolved configuration, serialized
  std::vector<ManifestInput> inputs;
  std::vector<std::string> outputs;
  double wall_seconds = 0.0;
};

void write_manifest(const RunManifest& m, const std::string& path);

}  // namespace tot
