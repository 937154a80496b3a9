#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "sdfa/model.hpp"
#include "sdfa/synth.hpp"
#include "sdfa/train.hpp"

namespace sdfa {

// Simple "key = value" text format with '#' comments. Ordering never matters:
// consumers canonicalize through a sorted map.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(const std::string& text);
KeyValues load_key_values(const std::filesystem::path& path);

// FNV-1a 64-bit digest over the sorted key=value lines, as hex. Stable under
// field reordering by construction.
std::string config_digest(const KeyValues& kv);

// Everything one run needs: the model, the optimizer and the pad target.
struct PipelineConfig {
  ModelConfig model;
  TrainConfig train;
  int target_length = 0;  // 0: use the longest sequence in the dataset
};

// Applies recognized keys onto `base`. Unknown keys are config errors.
PipelineConfig apply_key_values(const KeyValues& kv, PipelineConfig base = {});

// Canonical key-value view of a pipeline config (drives the digest).
KeyValues to_key_values(const PipelineConfig& cfg);

std::string pipeline_digest(const PipelineConfig& cfg);

// Synth generator spec in the same format: n_per_class, frames, fps, seed,
// noise_std, fall_duration_frames, adl_kinds (comma list).
SynthSpec synth_spec_from_key_values(const KeyValues& kv, SynthSpec base = {});

}  // namespace sdfa
