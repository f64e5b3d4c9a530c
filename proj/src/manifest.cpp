#include "tot/manifest.hpp"

#include <cstdio>

#include "json.hpp"
#include "tot/common.hpp"
#include "tot/io.hpp"
#include "tot/rng.hpp"

namespace tot {

ManifestInput fingerprint_file(const std::string& path) {
  const std::string data = read_text_file(path);
  ManifestInput in;
  in.path = path;
  in.bytes = data.size();
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(data)));
  in.fingerprint = buf;
  return in;
}

void write_manifest(const RunManifest& m, const std::string& path) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["subcommand"] = m.subcommand;
  j["seed"] = m.seed;
  if (m.config_json.empty()) {
    j["config"] = nlohmann::ordered_json::object();
  } else {
    try {
      j["config"] = nlohmann::ordered_json::parse(m.config_json);
    } catch (const std::exception& e) {
      throw IoError(std::string("manifest config is not valid json: ") + e.what());
    }
  }
  nlohmann::ordered_json inputs = nlohmann::ordered_json::array();
  for (const ManifestInput& in : m.inputs) {
    nlohmann::ordered_json ji;
    ji["path"] = in.path;
    ji["bytes"] = in.bytes;
    ji["fingerprint"] = in.fingerprint;
    inputs.push_back(std::move(ji));
  }
  j["inputs"] = std::move(inputs);
  j["outputs"] = m.outputs;
  j["wall_clock_seconds"] = m.wall_seconds;
  write_text_file(path, j.dump(2) + "\n");
}

}  // namespace tot
