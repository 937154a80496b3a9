#pragma once

#include <filesystem>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sdfa/skeleton.hpp"

namespace sdfa {

// Parses one OpenPose per-frame document: {"people":[{"pose_keypoints_2d":
// [75 floats]}...]}. Returns one Frame per detected person, in listed order.
std::vector<Frame> parse_openpose_frame(const nlohmann::json& doc);

// Inverse of parse_openpose_frame; used by tests and tooling.
nlohmann::json openpose_frame_to_json(const std::vector<Frame>& people);

// Loads every *.json file of a directory in lexicographic order (OpenPose
// writes zero-padded frame indices, so this is temporal order). Parse errors
// are reported with the offending frame index and filename.
std::vector<std::vector<Frame>> load_openpose_dir(const std::filesystem::path& dir);

// OpenPose does not guarantee stable person indices, so raw per-frame
// candidate lists are re-ordered into consistent tracks by greedy
// nearest-MidHip matching between consecutive frames. The result is
// rectangular: candidates[t][k] is track k at frame t, with an all-zero
// Frame where the track is absent.
std::vector<std::vector<Frame>> associate_tracks(
    const std::vector<std::vector<Frame>>& per_frame_candidates);

// Picks the track with the highest motion energy: the sum over joints and
// both coordinates of the temporal standard deviation, computed over the
// frames where the track is present. Ties go to the lowest track index.
// Frames where the winner is absent come back as empty frames.
std::vector<Frame> select_primary_skeleton(
    const std::vector<std::vector<Frame>>& candidates_over_time);

}  // namespace sdfa
