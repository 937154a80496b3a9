#include <doctest.h>

#include <algorithm>
#include <set>

#include "sdfa/split.hpp"
#include "sdfa/synth.hpp"

using namespace sdfa;

namespace {

// 20-sample hand-built dataset with full metadata coverage.
std::vector<SkeletonSequence> small_dataset() {
  std::vector<SkeletonSequence> out;
  const std::vector<std::string> falls = {"forward", "backward", "sideways",
                                          "knees", "sitting"};
  for (int i = 0; i < 20; ++i) {
    SkeletonSequence s;
    s.frames.resize(4);
    s.meta.subject_id = 1 + i % 5;
    s.meta.view_id = 1 + i % 3;
    s.meta.setup_id = 1 + i % 4;
    s.meta.trial_id = 1 + i % 3;
    s.meta.is_fall = i % 2 == 0;
    if (s.meta.is_fall) {
      s.meta.fall_type = falls[(i / 2) % falls.size()];
      s.meta.action_label = "fall";
    } else {
      s.meta.action_label = (i % 4 == 1) ? "walk" : "sit";
    }
    out.push_back(std::move(s));
  }
  return out;
}

void check_disjoint_cover(const Split& split, std::size_t total) {
  std::set<int> seen;
  for (int i : split.train) seen.insert(i);
  for (int i : split.test) {
    CHECK(seen.count(i) == 0);
    seen.insert(i);
  }
  CHECK(seen.size() == total);
  CHECK_FALSE(split.train.empty());
  CHECK_FALSE(split.test.empty());
}

}  // namespace

TEST_SUITE("split") {

TEST_CASE("every protocol yields a disjoint nonempty cover of the 20-sample set") {
  auto data = small_dataset();
  std::vector<SplitSpec> specs;
  specs.push_back({Protocol::seventy_thirty});
  SplitSpec cs;
  cs.protocol = Protocol::cross_subject;
  cs.train_subjects = {1, 2, 3};
  specs.push_back(cs);
  specs.push_back({Protocol::cross_view});
  specs.push_back({Protocol::cross_setup});
  specs.push_back({Protocol::cross_trial});
  SplitSpec cf;
  cf.protocol = Protocol::cross_fall;
  cf.held_out_fall_type = "sideways";
  specs.push_back(cf);

  for (const auto& spec : specs) {
    CAPTURE(to_string(spec.protocol));
    auto split = make_split(data, spec);
    check_disjoint_cover(split, data.size());
  }
}

TEST_CASE("cross_view: default trains on views 2 and 3, tests view 1") {
  auto data = small_dataset();
  auto split = make_split(data, {Protocol::cross_view});
  for (int i : split.test) CHECK(data[i].meta.view_id == 1);
  for (int i : split.train) CHECK(data[i].meta.view_id != 1);
}

TEST_CASE("cross_setup default: even setups train, odd test") {
  auto data = small_dataset();
  auto split = make_split(data, {Protocol::cross_setup});
  for (int i : split.train) CHECK(data[i].meta.setup_id % 2 == 0);
  for (int i : split.test) CHECK(data[i].meta.setup_id % 2 == 1);
}

TEST_CASE("cross_trial default: trials 1 and 2 train, trial 3 tests") {
  auto data = small_dataset();
  auto split = make_split(data, {Protocol::cross_trial});
  for (int i : split.train) CHECK(data[i].meta.trial_id != 3);
  for (int i : split.test) CHECK(data[i].meta.trial_id == 3);
}

TEST_CASE("cross_fall: the held-out type never trains and negatives land on both sides") {
  auto data = small_dataset();
  SplitSpec spec;
  spec.protocol = Protocol::cross_fall;
  spec.held_out_fall_type = "sideways";
  auto split = make_split(data, spec);
  for (int i : split.train) CHECK(data[i].meta.fall_type != "sideways");
  bool train_has_negative = false, test_has_negative = false, test_has_heldout = false;
  for (int i : split.train) train_has_negative |= !data[i].meta.is_fall;
  for (int i : split.test) {
    test_has_negative |= !data[i].meta.is_fall;
    test_has_heldout |= data[i].meta.fall_type == "sideways";
  }
  CHECK(train_has_negative);
  CHECK(test_has_negative);
  CHECK(test_has_heldout);
}

TEST_CASE("seventy_thirty is stratified by class and seeded") {
  auto data = small_dataset();  // 10 falls, 10 ADLs
  SplitSpec spec;
  spec.seed = 9;
  auto split = make_split(data, spec);
  long train_falls = 0;
  for (int i : split.train) train_falls += data[i].meta.is_fall ? 1 : 0;
  CHECK(train_falls == 7);  // round(0.7 * 10) per stratum
  CHECK(split.train.size() == 14);

  auto again = make_split(data, spec);
  CHECK(again.train == split.train);
  spec.seed = 10;
  auto other = make_split(data, spec);
  CHECK(other.train != split.train);  // overwhelmingly likely for 20 samples
}

TEST_CASE("missing metadata is reported with the offending samples") {
  auto data = small_dataset();
  data[3].meta.view_id = 0;
  data[7].meta.view_id = 0;
  try {
    make_split(data, {Protocol::cross_view});
    FAIL("expected SplitError");
  } catch (const SplitError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("3") != std::string::npos);
    CHECK(msg.find("7") != std::string::npos);
  }
}

TEST_CASE("cross_subject demands an explicit id set") {
  auto data = small_dataset();
  CHECK_THROWS_AS(make_split(data, {Protocol::cross_subject}), SplitError);
}

TEST_CASE("cross_fall without a held-out type or without typed falls fails") {
  auto data = small_dataset();
  SplitSpec spec;
  spec.protocol = Protocol::cross_fall;
  CHECK_THROWS_AS(make_split(data, spec), SplitError);
  spec.held_out_fall_type = "sideways";
  data[0].meta.fall_type.clear();
  CHECK_THROWS_AS(make_split(data, spec), SplitError);
}

TEST_CASE("empty partitions are errors") {
  auto data = small_dataset();
  SplitSpec spec;
  spec.protocol = Protocol::cross_view;
  spec.train_views = {1, 2, 3};  // nothing left to test
  CHECK_THROWS_AS(make_split(data, spec), SplitError);
}

TEST_CASE("fall_types enumerates distinct sorted kinds") {
  auto data = small_dataset();
  auto kinds = fall_types(data);
  CHECK(kinds.size() == 5);
  CHECK(std::is_sorted(kinds.begin(), kinds.end()));
}

TEST_CASE("synthetic default set supports every protocol") {
  SynthSpec spec;
  spec.n_per_class = 10;
  spec.frames = 80;
  spec.fall_duration_frames = 10;
  auto data = generate_synthetic_dataset(spec);

  std::vector<SplitSpec> specs;
  specs.push_back({Protocol::seventy_thirty});
  SplitSpec cs;
  cs.protocol = Protocol::cross_subject;
  cs.train_subjects = {1, 2, 3, 4, 5};
  specs.push_back(cs);
  specs.push_back({Protocol::cross_view});
  specs.push_back({Protocol::cross_setup});
  specs.push_back({Protocol::cross_trial});
  for (const auto& type : fall_types(data)) {
    SplitSpec cf;
    cf.protocol = Protocol::cross_fall;
    cf.held_out_fall_type = type;
    specs.push_back(cf);
  }
  for (const auto& s : specs) {
    CAPTURE(to_string(s.protocol));
    auto split = make_split(data, s);
    check_disjoint_cover(split, data.size());
  }
}

}  // TEST_SUITE
