#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "sdfa/openpose.hpp"
#include "sdfa/rng.hpp"
#include "sdfa/skeleton.hpp"

using namespace sdfa;
using nlohmann::json;

namespace {

Frame frame_at(float x, float y, float conf = 0.9f) {
  Frame f;
  for (int v = 0; v < kBody25Joints; ++v) {
    f.joints[v] = {x + v, y + 2.0f * v, conf};
  }
  return f;
}

SkeletonSequence basic_sequence(int t_len) {
  SkeletonSequence seq;
  seq.meta.is_fall = true;
  seq.meta.fall_type = "sideways";
  seq.meta.action_label = "fall";
  seq.meta.subject_id = 3;
  for (int t = 0; t < t_len; ++t) seq.frames.push_back(frame_at(10.0f + t, 20.0f));
  return seq;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_SUITE("skeleton") {

TEST_CASE("openpose: empty people list gives no candidates") {
  auto frames = parse_openpose_frame(json{{"people", json::array()}});
  CHECK(frames.empty());
}

TEST_CASE("openpose: one person of 75 zeros is one all-zero frame") {
  json doc = {{"people", {{{"pose_keypoints_2d", std::vector<double>(75, 0.0)}}}}};
  auto frames = parse_openpose_frame(doc);
  REQUIRE(frames.size() == 1);
  CHECK(frames[0].empty());
}

TEST_CASE("openpose: two people parse in listed order, field by field") {
  std::vector<double> kp1, kp2;
  for (int v = 0; v < kBody25Joints; ++v) {
    kp1.insert(kp1.end(), {100.0 + v, 200.0 + v, 0.5});
    kp2.insert(kp2.end(), {300.0 + v, 400.0 + v, 0.25});
  }
  json doc = {{"people",
               {{{"pose_keypoints_2d", kp1}}, {{"pose_keypoints_2d", kp2}}}}};
  auto frames = parse_openpose_frame(doc);
  REQUIRE(frames.size() == 2);
  for (int v = 0; v < kBody25Joints; ++v) {
    CHECK(frames[0].joints[v].x == doctest::Approx(100.0 + v));
    CHECK(frames[0].joints[v].y == doctest::Approx(200.0 + v));
    CHECK(frames[0].joints[v].confidence == doctest::Approx(0.5));
    CHECK(frames[1].joints[v].x == doctest::Approx(300.0 + v));
  }
}

TEST_CASE("openpose: malformed documents are parse errors") {
  CHECK_THROWS_AS(parse_openpose_frame(json{{"nope", 1}}), ParseError);
  json short_doc = {{"people", {{{"pose_keypoints_2d", std::vector<double>(74, 0.0)}}}}};
  CHECK_THROWS_AS(parse_openpose_frame(short_doc), ParseError);
}

TEST_CASE("openpose: parse -> serialize -> parse round-trip (property)") {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const int people = static_cast<int>(rng.below(4));
    std::vector<Frame> original;
    for (int p = 0; p < people; ++p) {
      Frame f;
      for (int v = 0; v < kBody25Joints; ++v) {
        f.joints[v] = {static_cast<float>(rng.uniform(0, 640)),
                       static_cast<float>(rng.uniform(0, 480)),
                       static_cast<float>(rng.uniform())};
      }
      original.push_back(f);
    }
    auto doc = openpose_frame_to_json(original);
    auto reparsed = parse_openpose_frame(doc);
    REQUIRE(reparsed.size() == original.size());
    for (std::size_t p = 0; p < original.size(); ++p) {
      for (int v = 0; v < kBody25Joints; ++v) {
        CHECK(reparsed[p].joints[v].x == original[p].joints[v].x);
        CHECK(reparsed[p].joints[v].y == original[p].joints[v].y);
        CHECK(reparsed[p].joints[v].confidence == original[p].joints[v].confidence);
      }
    }
  }
}

TEST_CASE("sequence file round-trip preserves everything") {
  auto seq = basic_sequence(7);
  auto dir = temp_dir("sdfa_seq_io");
  save_sequence(dir / "seq.json", seq);
  auto loaded = load_sequence(dir / "seq.json");
  REQUIRE(loaded.frames.size() == seq.frames.size());
  CHECK(loaded.meta.is_fall == seq.meta.is_fall);
  CHECK(loaded.meta.fall_type == seq.meta.fall_type);
  CHECK(loaded.meta.subject_id == seq.meta.subject_id);
  for (std::size_t t = 0; t < seq.frames.size(); ++t)
    for (int v = 0; v < kBody25Joints; ++v) {
      CHECK(loaded.frames[t].joints[v].x == seq.frames[t].joints[v].x);
      CHECK(loaded.frames[t].joints[v].confidence == seq.frames[t].joints[v].confidence);
    }
}

TEST_CASE("sequence meta without is_fall is rejected") {
  json doc = {{"fps", 30.0},
              {"meta", {{"subject_id", 1}}},
              {"frames", json::array()}};
  CHECK_THROWS_AS(sequence_from_json(doc), ParseError);
}

TEST_CASE("dataset file round-trip and single-sequence fallback") {
  auto dir = temp_dir("sdfa_ds_io");
  std::vector<SkeletonSequence> seqs = {basic_sequence(4), basic_sequence(6)};
  seqs[1].meta.is_fall = false;
  seqs[1].meta.fall_type.clear();
  save_dataset(dir / "ds.json", seqs);
  auto loaded = load_dataset(dir / "ds.json");
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].frames.size() == 4);
  CHECK(loaded[1].frames.size() == 6);
  CHECK_FALSE(loaded[1].meta.is_fall);

  save_sequence(dir / "one.json", seqs[0]);
  auto single = load_dataset(dir / "one.json");
  CHECK(single.size() == 1);
}

TEST_CASE("track selection: single candidate wins") {
  std::vector<std::vector<Frame>> cands;
  for (int t = 0; t < 5; ++t) cands.push_back({frame_at(100.0f + t, 50.0f)});
  auto track = select_primary_skeleton(cands);
  REQUIRE(track.size() == 5);
  CHECK(track[0].joints[0].x == doctest::Approx(100.0f));
}

TEST_CASE("track selection: moving beats static") {
  std::vector<std::vector<Frame>> cands;
  for (int t = 0; t < 8; ++t) {
    cands.push_back({frame_at(200.0f, 100.0f),             // static furniture
                     frame_at(100.0f + t, 50.0f)});        // walking person
  }
  auto track = select_primary_skeleton(cands);
  CHECK(track[0].joints[0].x == doctest::Approx(100.0f));
  CHECK(track[7].joints[0].x == doctest::Approx(107.0f));
}

TEST_CASE("track selection: larger sinusoid amplitude wins") {
  // Hand/desk check: population std of A*sin over one period is A/sqrt(2),
  // so summed joint std scales with amplitude and the 5 px candidate wins.
  std::vector<std::vector<Frame>> cands;
  const int t_len = 16;
  for (int t = 0; t < t_len; ++t) {
    const float phase = static_cast<float>(2.0 * 3.14159265358979 * t / t_len);
    cands.push_back({frame_at(100.0f + 1.0f * std::sin(phase), 50.0f),
                     frame_at(300.0f + 5.0f * std::sin(phase), 50.0f)});
  }
  auto track = select_primary_skeleton(cands);
  CHECK(track[0].joints[0].x == doctest::Approx(300.0f).epsilon(0.01));
}

TEST_CASE("track selection: no candidates anywhere is an error") {
  std::vector<std::vector<Frame>> empty_rows(4);
  CHECK_THROWS_AS(select_primary_skeleton(empty_rows), DataError);
}

TEST_CASE("track association keeps swapped list indices consistent") {
  // Two people; the raw per-frame order flips halfway through. Association
  // by nearest MidHip must keep each track's coordinates continuous.
  std::vector<std::vector<Frame>> raw;
  for (int t = 0; t < 6; ++t) {
    Frame a = frame_at(100.0f + t, 50.0f);
    Frame b = frame_at(400.0f - t, 60.0f);
    if (t < 3) {
      raw.push_back({a, b});
    } else {
      raw.push_back({b, a});  // detector swapped the order
    }
  }
  auto tracks = associate_tracks(raw);
  REQUIRE(tracks.size() == 6);
  REQUIRE(tracks[0].size() == 2);
  for (int t = 0; t < 6; ++t) {
    CHECK(tracks[t][0].joints[0].x == doctest::Approx(100.0f + t));
    CHECK(tracks[t][1].joints[0].x == doctest::Approx(400.0f - t));
  }
}

TEST_CASE("track association: absent person becomes empty frames") {
  std::vector<std::vector<Frame>> raw;
  raw.push_back({frame_at(100.0f, 50.0f)});
  raw.push_back({});  // nobody detected
  raw.push_back({frame_at(102.0f, 50.0f)});
  auto tracks = associate_tracks(raw);
  REQUIRE(tracks.size() == 3);
  REQUIRE(tracks[0].size() == 1);
  CHECK_FALSE(tracks[0][0].empty());
  CHECK(tracks[1][0].empty());
  CHECK_FALSE(tracks[2][0].empty());
}

}  // TEST_SUITE
