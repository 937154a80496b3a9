#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace sdfa {

// Provenance record for one CLI run; enough to reproduce the command.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  std::string config_digest;
  std::uint64_t seed = 0;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  double wall_time_ms = 0.0;
};

std::string manifest_to_string(const RunManifest& m);
void write_manifest(const std::filesystem::path& path, const RunManifest& m);

}  // namespace sdfa
