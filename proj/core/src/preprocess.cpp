#include "sdfa/preprocess.hpp"

#include <algorithm>
#include <cmath>

namespace sdfa {

SkeletonSequence remove_empty_frames(const SkeletonSequence& seq) {
  SkeletonSequence out = seq;
  out.frames.clear();
  for (const Frame& f : seq.frames) {
    if (!f.empty()) out.frames.push_back(f);
  }
  if (out.frames.empty()) {
    throw DataError("empty sequence: every frame is all-zero");
  }
  return out;
}

SkeletonSequence pad_to_length(const SkeletonSequence& seq, int target) {
  if (target <= 0) {
    throw ConfigError("pad_to_length: target must be positive, got " +
                      std::to_string(target));
  }
  if (seq.frames.empty()) throw DataError("pad_to_length: empty sequence");

  const int len = static_cast<int>(seq.frames.size());
  SkeletonSequence out = seq;
  if (len == target) return out;

  out.frames.clear();
  out.frames.reserve(target);
  if (len < target) {
    for (int i = 0; i < target; ++i) out.frames.push_back(seq.frames[i % len]);
  } else {
    for (int i = 0; i < target; ++i) {
      int idx = static_cast<int>(std::llround(static_cast<double>(i) * len / target));
      idx = std::clamp(idx, 0, len - 1);
      out.frames.push_back(seq.frames[idx]);
    }
  }
  return out;
}

SkeletonSequence view_invariant_transform(const SkeletonSequence& seq) {
  SkeletonSequence out = seq;
  const Frame* reference = nullptr;
  for (const Frame& f : seq.frames) {
    if (f.joints[kMidHip].confidence > 0.0f) {
      reference = &f;
      break;
    }
  }
  if (reference == nullptr) {
    out.view_transform_skipped = true;
    return out;
  }
  const float ox = reference->joints[kMidHip].x;
  const float oy = reference->joints[kMidHip].y;
  for (Frame& f : out.frames) {
    for (Joint2D& j : f.joints) {
      j.x -= ox;
      j.y -= oy;
    }
  }
  return out;
}

SkeletonSequence normalize_sequence(const SkeletonSequence& seq) {
  SkeletonSequence out = seq;
  if (seq.frames.empty()) return out;
  const double count = static_cast<double>(seq.frames.size()) * kBody25Joints;

  for (int channel = 0; channel < 2; ++channel) {
    double sum = 0.0, sumsq = 0.0;
    for (const Frame& f : seq.frames) {
      for (const Joint2D& j : f.joints) {
        double v = (channel == 0) ? j.x : j.y;
        sum += v;
        sumsq += v * v;
      }
    }
    const double mean = sum / count;
    const double var = std::max(0.0, sumsq / count - mean * mean);
    const double stddev = std::sqrt(var);
    const double scale = (stddev < 1e-6) ? 1.0 : 1.0 / stddev;
    for (Frame& f : out.frames) {
      for (Joint2D& j : f.joints) {
        float& v = (channel == 0) ? j.x : j.y;
        v = static_cast<float>((v - mean) * scale);
      }
    }
  }
  return out;
}

SkeletonSequence preprocess_sequence(const SkeletonSequence& seq,
                                     const PreprocessOptions& opts) {
  SkeletonSequence s = remove_empty_frames(seq);
  s = pad_to_length(s, opts.target_length);
  s = view_invariant_transform(s);
  return normalize_sequence(s);
}

}  // namespace sdfa
