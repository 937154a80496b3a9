#include "sdfa/skeleton.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

namespace sdfa {

using nlohmann::json;

json sequence_to_json(const SkeletonSequence& seq) {
  json meta = {
      {"subject_id", seq.meta.subject_id},
      {"view_id", seq.meta.view_id},
      {"setup_id", seq.meta.setup_id},
      {"trial_id", seq.meta.trial_id},
      {"action_label", seq.meta.action_label},
      {"is_fall", seq.meta.is_fall},
  };
  if (!seq.meta.fall_type.empty()) meta["fall_type"] = seq.meta.fall_type;

  json frames = json::array();
  for (const Frame& f : seq.frames) {
    json fj = json::array();
    for (const Joint2D& j : f.joints) fj.push_back({j.x, j.y, j.confidence});
    frames.push_back(std::move(fj));
  }

  json doc = {{"fps", seq.fps}, {"meta", std::move(meta)}, {"frames", std::move(frames)}};
  if (seq.view_transform_skipped) doc["warnings"] = json::array({"view_transform_skipped"});
  return doc;
}

SkeletonSequence sequence_from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("frames") || !doc.contains("meta")) {
    throw ParseError("sequence document needs 'meta' and 'frames'");
  }
  SkeletonSequence seq;
  seq.fps = doc.value("fps", 30.0);

  const json& meta = doc.at("meta");
  if (!meta.contains("is_fall")) {
    throw ParseError("sequence meta is missing mandatory 'is_fall'");
  }
  seq.meta.subject_id = meta.value("subject_id", 0);
  seq.meta.view_id = meta.value("view_id", 0);
  seq.meta.setup_id = meta.value("setup_id", 0);
  seq.meta.trial_id = meta.value("trial_id", 0);
  seq.meta.action_label = meta.value("action_label", std::string());
  seq.meta.fall_type = meta.value("fall_type", std::string());
  seq.meta.is_fall = meta.at("is_fall").get<bool>();

  const json& frames = doc.at("frames");
  if (!frames.is_array()) throw ParseError("'frames' must be an array");
  seq.frames.reserve(frames.size());
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const json& fj = frames[t];
    if (!fj.is_array() || fj.size() != kBody25Joints) {
      throw ParseError("frame " + std::to_string(t) + " does not have " +
                       std::to_string(kBody25Joints) + " joints");
    }
    Frame f;
    for (int v = 0; v < kBody25Joints; ++v) {
      const json& jj = fj[v];
      if (!jj.is_array() || jj.size() != 3) {
        throw ParseError("frame " + std::to_string(t) + " joint " +
                         std::to_string(v) + " is not [x,y,c]");
      }
      f.joints[v] = {jj[0].get<float>(), jj[1].get<float>(), jj[2].get<float>()};
    }
    seq.frames.push_back(f);
  }

  if (doc.contains("warnings")) {
    for (const auto& w : doc.at("warnings")) {
      if (w == "view_transform_skipped") seq.view_transform_skipped = true;
    }
  }
  return seq;
}

namespace {

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return doc;
}

void write_json_file(const std::filesystem::path& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << doc.dump() << "\n";
}

}  // namespace

void save_sequence(const std::filesystem::path& path, const SkeletonSequence& seq) {
  write_json_file(path, sequence_to_json(seq));
}

SkeletonSequence load_sequence(const std::filesystem::path& path) {
  return sequence_from_json(read_json_file(path));
}

void save_dataset(const std::filesystem::path& path,
                  const std::vector<SkeletonSequence>& seqs) {
  json list = json::array();
  for (const auto& s : seqs) list.push_back(sequence_to_json(s));
  write_json_file(path, json{{"sequences", std::move(list)}});
}

std::vector<SkeletonSequence> load_dataset(const std::filesystem::path& path) {
  json doc = read_json_file(path);
  std::vector<SkeletonSequence> out;
  if (doc.contains("sequences")) {
    for (const auto& s : doc.at("sequences")) out.push_back(sequence_from_json(s));
  } else {
    out.push_back(sequence_from_json(doc));
  }
  return out;
}

}  // namespace sdfa
