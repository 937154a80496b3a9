#pragma once

#include <filesystem>

#include "sdfa/model.hpp"

namespace sdfa {

// Checkpoint layout: 8-byte magic "SDFACKPT", a little-endian u64 manifest
// length, a JSON manifest {format_version, config, tensors:[{name, shape,
// offset, size}]}, then the raw float32 payload (little-endian) in manifest
// order. Offsets are relative to the payload start. Loading rejects magic,
// version, name, shape and size mismatches.
void save_checkpoint(const std::filesystem::path& path, SdfaModel& model);
SdfaModel load_checkpoint(const std::filesystem::path& path);

}  // namespace sdfa
