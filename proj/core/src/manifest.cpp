#include "sdfa/manifest.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "sdfa/errors.hpp"

namespace sdfa {

std::string manifest_to_string(const RunManifest& m) {
  nlohmann::json doc = {
      {"command", m.command},
      {"argv", m.argv},
      {"config_digest", m.config_digest},
      {"seed", m.seed},
      {"inputs", m.inputs},
      {"outputs", m.outputs},
      {"wall_time_ms", m.wall_time_ms},
  };
  return doc.dump(2) + "\n";
}

void write_manifest(const std::filesystem::path& path, const RunManifest& m) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << manifest_to_string(m);
}

}  // namespace sdfa
