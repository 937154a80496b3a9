#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sdfa/skeleton.hpp"

namespace sdfa {

// Synthetic fall/ADL generator. Falls and lie-downs share start and end
// poses; the transition speed is what separates the classes, so the motion
// stream carries the discriminative signal. Everything is a deterministic
// function of (seed, sample index).
struct SynthSpec {
  int n_per_class = 50;            // sequences per fall class and per ADL kind
  int frames = 120;
  double fps = 30.0;
  std::uint64_t seed = 0;
  double noise_std = 0.5;          // pixel-level Gaussian jitter
  int fall_duration_frames = 15;   // transition window of a fall
  std::vector<std::string> adl_kinds = {"sit", "lie_down", "walk", "pick_up"};

  void validate() const;
};

// Fall kinds cycled over fall samples, for leave-one-out evaluation.
const std::vector<std::string>& synth_fall_kinds();

// n_per_class falls plus n_per_class sequences per ADL kind, metadata
// (subject/view/setup/trial) assigned round-robin.
std::vector<SkeletonSequence> generate_synthetic_dataset(const SynthSpec& spec);

}  // namespace sdfa
