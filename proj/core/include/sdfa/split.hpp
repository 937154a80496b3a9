#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "sdfa/skeleton.hpp"

namespace sdfa {

enum class Protocol {
  seventy_thirty,
  cross_subject,
  cross_view,
  cross_setup,
  cross_trial,
  cross_fall,
};

std::string to_string(Protocol p);
Protocol protocol_from_string(const std::string& s);

// Protocol-specific parameters. Empty ID sets fall back to the conventional
// defaults where one exists: views {2,3} train, trials {1,2} train, even
// setups train. cross_subject has no convention and requires an explicit set.
struct SplitSpec {
  Protocol protocol = Protocol::seventy_thirty;
  std::set<int> train_subjects;
  std::set<int> train_views;
  std::set<int> train_setups;
  std::set<int> train_trials;
  std::string held_out_fall_type;   // cross_fall
  double train_fraction = 0.7;      // seventy_thirty and cross_fall negatives
  std::uint64_t seed = 0;
};

struct Split {
  std::vector<int> train, test;
};

// Deterministic disjoint partition of dataset indices. Throws SplitError when
// required metadata is missing (listing the offending samples) or when either
// side ends up empty.
Split make_split(const std::vector<SkeletonSequence>& dataset, const SplitSpec& spec);

// Distinct fall types present in the dataset, sorted; drives leave-one-out
// cross_fall folds.
std::vector<std::string> fall_types(const std::vector<SkeletonSequence>& dataset);

}  // namespace sdfa
