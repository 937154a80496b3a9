#include "sdfa/openpose.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

namespace sdfa {

using nlohmann::json;

std::vector<Frame> parse_openpose_frame(const json& doc) {
  if (!doc.is_object() || !doc.contains("people")) {
    throw ParseError("keypoint document has no 'people' list");
  }
  const json& people = doc.at("people");
  if (!people.is_array()) throw ParseError("'people' must be an array");

  std::vector<Frame> out;
  out.reserve(people.size());
  for (std::size_t p = 0; p < people.size(); ++p) {
    const json& person = people[p];
    if (!person.is_object() || !person.contains("pose_keypoints_2d")) {
      throw ParseError("person " + std::to_string(p) + " has no pose_keypoints_2d");
    }
    const json& kp = person.at("pose_keypoints_2d");
    if (!kp.is_array() || kp.size() != 3 * kBody25Joints) {
      throw ParseError("person " + std::to_string(p) + " keypoint array length " +
                       std::to_string(kp.is_array() ? kp.size() : 0) +
                       " != " + std::to_string(3 * kBody25Joints));
    }
    Frame f;
    for (int v = 0; v < kBody25Joints; ++v) {
      f.joints[v] = {kp[3 * v].get<float>(), kp[3 * v + 1].get<float>(),
                     kp[3 * v + 2].get<float>()};
    }
    out.push_back(f);
  }
  return out;
}

json openpose_frame_to_json(const std::vector<Frame>& people) {
  json list = json::array();
  for (const Frame& f : people) {
    json kp = json::array();
    for (const Joint2D& j : f.joints) {
      kp.push_back(j.x);
      kp.push_back(j.y);
      kp.push_back(j.confidence);
    }
    list.push_back(json{{"pose_keypoints_2d", std::move(kp)}});
  }
  return json{{"people", std::move(list)}};
}

std::vector<std::vector<Frame>> load_openpose_dir(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
    if (entry.path().filename() == "meta.json") continue;  // sequence sidecar
    files.push_back(entry.path());
  }
  if (files.empty()) throw DataError("no .json keypoint files in " + dir.string());
  std::sort(files.begin(), files.end());

  std::vector<std::vector<Frame>> frames;
  frames.reserve(files.size());
  for (std::size_t t = 0; t < files.size(); ++t) {
    std::ifstream in(files[t]);
    if (!in) throw DataError("cannot open " + files[t].string());
    json doc;
    try {
      in >> doc;
      frames.push_back(parse_openpose_frame(doc));
    } catch (const json::exception& e) {
      throw ParseError("frame " + std::to_string(t) + " (" +
                       files[t].filename().string() + "): " + e.what());
    } catch (const ParseError& e) {
      throw ParseError("frame " + std::to_string(t) + " (" +
                       files[t].filename().string() + "): " + e.what());
    }
  }
  return frames;
}

namespace {

// Matching anchor for a candidate: MidHip when detected, otherwise the
// centroid of confident joints.
bool anchor_point(const Frame& f, float& x, float& y) {
  const Joint2D& hip = f.joints[kMidHip];
  if (hip.confidence > 0.0f) {
    x = hip.x;
    y = hip.y;
    return true;
  }
  float sx = 0.0f, sy = 0.0f;
  int count = 0;
  for (const Joint2D& j : f.joints) {
    if (j.confidence > 0.0f) {
      sx += j.x;
      sy += j.y;
      ++count;
    }
  }
  if (count == 0) return false;
  x = sx / count;
  y = sy / count;
  return true;
}

}  // namespace

std::vector<std::vector<Frame>> associate_tracks(
    const std::vector<std::vector<Frame>>& per_frame_candidates) {
  const std::size_t t_count = per_frame_candidates.size();

  struct Track {
    float last_x = 0.0f, last_y = 0.0f;
    bool has_anchor = false;
  };
  std::vector<Track> tracks;
  // assignments[t][k] = candidate index of track k at frame t, or -1
  std::vector<std::vector<int>> assignments(t_count);

  for (std::size_t t = 0; t < t_count; ++t) {
    const auto& cands = per_frame_candidates[t];
    std::vector<int> row(tracks.size(), -1);
    std::vector<bool> cand_used(cands.size(), false);

    // Greedy nearest-anchor matching: repeatedly take the globally closest
    // unmatched (track, candidate) pair.
    while (true) {
      double best = std::numeric_limits<double>::infinity();
      int best_track = -1, best_cand = -1;
      for (std::size_t k = 0; k < tracks.size(); ++k) {
        if (row[k] != -1 || !tracks[k].has_anchor) continue;
        for (std::size_t c = 0; c < cands.size(); ++c) {
          if (cand_used[c] || cands[c].empty()) continue;
          float ax, ay;
          if (!anchor_point(cands[c], ax, ay)) continue;
          double dx = ax - tracks[k].last_x;
          double dy = ay - tracks[k].last_y;
          double d = dx * dx + dy * dy;
          if (d < best) {
            best = d;
            best_track = static_cast<int>(k);
            best_cand = static_cast<int>(c);
          }
        }
      }
      if (best_track < 0) break;
      row[best_track] = best_cand;
      cand_used[best_cand] = true;
      float ax, ay;
      anchor_point(cands[best_cand], ax, ay);
      tracks[best_track].last_x = ax;
      tracks[best_track].last_y = ay;
    }

    // Unmatched candidates start new tracks.
    for (std::size_t c = 0; c < cands.size(); ++c) {
      if (cand_used[c] || cands[c].empty()) continue;
      float ax, ay;
      if (!anchor_point(cands[c], ax, ay)) continue;
      tracks.push_back({ax, ay, true});
      row.push_back(static_cast<int>(c));
    }
    assignments[t] = std::move(row);
  }

  std::vector<std::vector<Frame>> out(t_count);
  for (std::size_t t = 0; t < t_count; ++t) {
    out[t].resize(tracks.size());  // default: empty frames
    for (std::size_t k = 0; k < assignments[t].size(); ++k) {
      int c = assignments[t][k];
      if (c >= 0) out[t][k] = per_frame_candidates[t][c];
    }
  }
  return out;
}

std::vector<Frame> select_primary_skeleton(
    const std::vector<std::vector<Frame>>& candidates_over_time) {
  std::size_t width = 0;
  for (const auto& row : candidates_over_time) width = std::max(width, row.size());
  if (width == 0) throw DataError("empty sequence: no skeleton candidates in any frame");

  // Summed per-joint temporal standard deviation of x and y (population
  // form), over the frames where the track is present.
  double best_energy = -1.0;
  std::size_t best_track = 0;
  bool any_present = false;
  for (std::size_t k = 0; k < width; ++k) {
    std::vector<const Frame*> present;
    for (const auto& row : candidates_over_time) {
      if (k < row.size() && !row[k].empty()) present.push_back(&row[k]);
    }
    if (present.empty()) continue;
    any_present = true;
    double energy = 0.0;
    const double n = static_cast<double>(present.size());
    for (int v = 0; v < kBody25Joints; ++v) {
      double sx = 0, sy = 0, sxx = 0, syy = 0;
      for (const Frame* f : present) {
        sx += f->joints[v].x;
        sy += f->joints[v].y;
        sxx += static_cast<double>(f->joints[v].x) * f->joints[v].x;
        syy += static_cast<double>(f->joints[v].y) * f->joints[v].y;
      }
      double vx = std::max(0.0, sxx / n - (sx / n) * (sx / n));
      double vy = std::max(0.0, syy / n - (sy / n) * (sy / n));
      energy += std::sqrt(vx) + std::sqrt(vy);
    }
    if (energy > best_energy) {
      best_energy = energy;
      best_track = k;
    }
  }
  if (!any_present) {
    throw DataError("empty sequence: no skeleton candidates in any frame");
  }

  std::vector<Frame> out;
  out.reserve(candidates_over_time.size());
  for (const auto& row : candidates_over_time) {
    out.push_back(best_track < row.size() ? row[best_track] : Frame{});
  }
  return out;
}

}  // namespace sdfa
