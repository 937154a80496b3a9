#include "sdfa/split.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "sdfa/rng.hpp"

namespace sdfa {

std::string to_string(Protocol p) {
  switch (p) {
    case Protocol::seventy_thirty: return "seventy_thirty";
    case Protocol::cross_subject: return "cross_subject";
    case Protocol::cross_view: return "cross_view";
    case Protocol::cross_setup: return "cross_setup";
    case Protocol::cross_trial: return "cross_trial";
    case Protocol::cross_fall: return "cross_fall";
  }
  return "seventy_thirty";
}

Protocol protocol_from_string(const std::string& s) {
  if (s == "seventy_thirty" || s == "70-30" || s == "7030") return Protocol::seventy_thirty;
  if (s == "cross_subject") return Protocol::cross_subject;
  if (s == "cross_view") return Protocol::cross_view;
  if (s == "cross_setup") return Protocol::cross_setup;
  if (s == "cross_trial") return Protocol::cross_trial;
  if (s == "cross_fall") return Protocol::cross_fall;
  throw ConfigError("unknown split protocol '" + s + "'");
}

namespace {

std::string offender_list(const std::vector<int>& idx) {
  std::string s;
  for (std::size_t i = 0; i < idx.size() && i < 10; ++i) {
    if (!s.empty()) s += ",";
    s += std::to_string(idx[i]);
  }
  if (idx.size() > 10) s += ",...";
  return s;
}

// Requires the given id field to be positive (these datasets use 1-based
// ids; 0 means unknown).
void require_ids(const std::vector<SkeletonSequence>& dataset,
                 int SequenceMeta::*field, const char* what) {
  std::vector<int> missing;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (dataset[i].meta.*field <= 0) missing.push_back(static_cast<int>(i));
  }
  if (!missing.empty()) {
    throw SplitError(std::string(what) + " metadata missing on samples [" +
                     offender_list(missing) + "]");
  }
}

// Seeded stratified split: within each stratum (processed in sorted key
// order) indices are shuffled and the first round(fraction*n) go to train.
Split stratified_split(const std::map<std::string, std::vector<int>>& strata,
                       double fraction, std::uint64_t seed) {
  Split split;
  Rng rng(seed);
  for (const auto& [key, members] : strata) {
    std::vector<int> idx = members;
    rng.shuffle(idx);
    const std::size_t n_train = static_cast<std::size_t>(
        std::lround(fraction * static_cast<double>(idx.size())));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      (i < n_train ? split.train : split.test).push_back(idx[i]);
    }
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

void partition_by(const std::vector<SkeletonSequence>& dataset,
                  int SequenceMeta::*field, const std::set<int>& train_ids,
                  Split& split) {
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const bool in_train = train_ids.count(dataset[i].meta.*field) > 0;
    (in_train ? split.train : split.test).push_back(static_cast<int>(i));
  }
}

}  // namespace

std::vector<std::string> fall_types(const std::vector<SkeletonSequence>& dataset) {
  std::set<std::string> types;
  for (const auto& seq : dataset) {
    if (seq.meta.is_fall && !seq.meta.fall_type.empty()) types.insert(seq.meta.fall_type);
  }
  return {types.begin(), types.end()};
}

Split make_split(const std::vector<SkeletonSequence>& dataset, const SplitSpec& spec) {
  if (dataset.empty()) throw SplitError("empty dataset");
  if (spec.train_fraction <= 0.0 || spec.train_fraction >= 1.0) {
    throw SplitError("train_fraction must lie in (0,1)");
  }
  Split split;

  switch (spec.protocol) {
    case Protocol::seventy_thirty: {
      std::map<std::string, std::vector<int>> strata;
      for (std::size_t i = 0; i < dataset.size(); ++i) {
        strata[dataset[i].meta.is_fall ? "fall" : "adl"].push_back(static_cast<int>(i));
      }
      split = stratified_split(strata, spec.train_fraction, spec.seed);
      break;
    }
    case Protocol::cross_subject: {
      require_ids(dataset, &SequenceMeta::subject_id, "subject");
      if (spec.train_subjects.empty()) {
        throw SplitError("cross_subject needs an explicit train subject set");
      }
      partition_by(dataset, &SequenceMeta::subject_id, spec.train_subjects, split);
      break;
    }
    case Protocol::cross_view: {
      require_ids(dataset, &SequenceMeta::view_id, "view");
      std::set<int> train = spec.train_views.empty() ? std::set<int>{2, 3}
                                                     : spec.train_views;
      partition_by(dataset, &SequenceMeta::view_id, train, split);
      break;
    }
    case Protocol::cross_setup: {
      require_ids(dataset, &SequenceMeta::setup_id, "setup");
      if (spec.train_setups.empty()) {
        // Convention: even-numbered setups train, odd test.
        for (std::size_t i = 0; i < dataset.size(); ++i) {
          const bool even = dataset[i].meta.setup_id % 2 == 0;
          (even ? split.train : split.test).push_back(static_cast<int>(i));
        }
      } else {
        partition_by(dataset, &SequenceMeta::setup_id, spec.train_setups, split);
      }
      break;
    }
    case Protocol::cross_trial: {
      require_ids(dataset, &SequenceMeta::trial_id, "trial");
      std::set<int> train = spec.train_trials.empty() ? std::set<int>{1, 2}
                                                      : spec.train_trials;
      partition_by(dataset, &SequenceMeta::trial_id, train, split);
      break;
    }
    case Protocol::cross_fall: {
      if (spec.held_out_fall_type.empty()) {
        throw SplitError("cross_fall needs a held-out fall type");
      }
      std::vector<int> unlabeled;
      for (std::size_t i = 0; i < dataset.size(); ++i) {
        if (dataset[i].meta.is_fall && dataset[i].meta.fall_type.empty()) {
          unlabeled.push_back(static_cast<int>(i));
        }
      }
      if (!unlabeled.empty()) {
        throw SplitError("fall_type metadata missing on fall samples [" +
                         offender_list(unlabeled) + "]");
      }
      // Falls of the held-out type test, other falls train. Non-falls are
      // split by the train_fraction rule, stratified by action label, so
      // both partitions keep negatives.
      std::map<std::string, std::vector<int>> negative_strata;
      for (std::size_t i = 0; i < dataset.size(); ++i) {
        const auto& meta = dataset[i].meta;
        if (meta.is_fall) {
          const bool held_out = meta.fall_type == spec.held_out_fall_type;
          (held_out ? split.test : split.train).push_back(static_cast<int>(i));
        } else {
          negative_strata[meta.action_label].push_back(static_cast<int>(i));
        }
      }
      Split negatives = stratified_split(negative_strata, spec.train_fraction, spec.seed);
      split.train.insert(split.train.end(), negatives.train.begin(), negatives.train.end());
      split.test.insert(split.test.end(), negatives.test.begin(), negatives.test.end());
      std::sort(split.train.begin(), split.train.end());
      std::sort(split.test.begin(), split.test.end());
      break;
    }
  }

  if (split.train.empty() || split.test.empty()) {
    throw SplitError(to_string(spec.protocol) + " produced an empty " +
                     (split.train.empty() ? "train" : "test") + " partition");
  }
  return split;
}

}  // namespace sdfa
