#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sdfa/errors.hpp"

namespace sdfa {

inline constexpr int kBody25Joints = 25;
inline constexpr int kMidHip = 8;  // BODY_25 index of the spine/hip joint

struct Joint2D {
  float x = 0.0f;
  float y = 0.0f;
  float confidence = 0.0f;  // detector score in [0, 1]
};

// One time slice of a skeleton, always 25 joints in BODY_25 order.
// OpenPose emits exact zeros for misses, so an all-zero frame means
// "no detection".
struct Frame {
  std::array<Joint2D, kBody25Joints> joints{};

  bool empty() const {
    for (const auto& j : joints) {
      if (j.x != 0.0f || j.y != 0.0f || j.confidence != 0.0f) return false;
    }
    return true;
  }
};

struct SequenceMeta {
  int subject_id = 0;
  int view_id = 0;
  int setup_id = 0;
  int trial_id = 0;
  std::string action_label;
  std::string fall_type;  // empty unless a fall kind is known
  bool is_fall = false;
};

struct SkeletonSequence {
  std::vector<Frame> frames;
  double fps = 30.0;
  SequenceMeta meta;
  // Set when the view-invariant transform was skipped because MidHip was
  // never detected with positive confidence.
  bool view_transform_skipped = false;
};

// Canonical sequence document: {fps, meta{...}, frames:[[[x,y,c] x25] xT]}.
nlohmann::json sequence_to_json(const SkeletonSequence& seq);
SkeletonSequence sequence_from_json(const nlohmann::json& doc);

void save_sequence(const std::filesystem::path& path, const SkeletonSequence& seq);
SkeletonSequence load_sequence(const std::filesystem::path& path);

// Dataset document: {"sequences": [<sequence>...]}. A bare sequence document
// loads as a one-element dataset.
void save_dataset(const std::filesystem::path& path,
                  const std::vector<SkeletonSequence>& seqs);
std::vector<SkeletonSequence> load_dataset(const std::filesystem::path& path);

}  // namespace sdfa
