#pragma once

#include <vector>

#include "sdfa/skeleton.hpp"
#include "sdfa/tensor.hpp"

namespace sdfa {

// Drops frames where every coordinate and confidence is exactly zero.
// Idempotent. Throws DataError when nothing remains.
SkeletonSequence remove_empty_frames(const SkeletonSequence& seq);

// Forces the sequence to exactly `target` frames: shorter sequences repeat
// cyclically from the start; longer ones are uniformly subsampled at indices
// round(i*len/target), clamped in range.
SkeletonSequence pad_to_length(const SkeletonSequence& seq, int target);

// Translates every joint by the negative MidHip position of the first frame
// whose MidHip confidence is positive. One fixed reference (not per-frame),
// so the downward displacement of a fall survives the transform. If MidHip
// is never seen, the sequence is returned untouched with
// view_transform_skipped set.
SkeletonSequence view_invariant_transform(const SkeletonSequence& seq);

// Zero mean / unit variance per coordinate channel (x and y separately,
// population statistics over frames x joints). Channels with std below 1e-6
// are centered only. Confidences pass through.
SkeletonSequence normalize_sequence(const SkeletonSequence& seq);

struct PreprocessOptions {
  int target_length = 300;  // 1145 fits long UPFD-style recordings
};

// Full cleaning pipeline in order: remove empty frames, pad/subsample,
// view-invariant transform, normalize.
SkeletonSequence preprocess_sequence(const SkeletonSequence& seq,
                                     const PreprocessOptions& opts);

// Packs same-length sequences into an (N, channels, T, 25) tensor with
// channel order (x, y, confidence). channels = 2 drops the confidence plane.
template <class S = float>
Tensor4<S> to_feature_tensor(const std::vector<SkeletonSequence>& batch,
                             int channels = 3) {
  if (batch.empty()) throw DataError("to_feature_tensor: empty batch");
  if (channels != 2 && channels != 3) {
    throw ConfigError("to_feature_tensor: channels must be 2 or 3");
  }
  const int t_len = static_cast<int>(batch.front().frames.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (static_cast<int>(batch[i].frames.size()) != t_len) {
      throw DataError("to_feature_tensor: ragged batch, sequence " +
                      std::to_string(i) + " has " +
                      std::to_string(batch[i].frames.size()) + " frames, expected " +
                      std::to_string(t_len));
    }
  }
  Tensor4<S> out(static_cast<int>(batch.size()), channels, t_len, kBody25Joints);
  for (int n = 0; n < out.shape.n; ++n) {
    for (int t = 0; t < t_len; ++t) {
      const Frame& f = batch[n].frames[t];
      for (int v = 0; v < kBody25Joints; ++v) {
        out.at(n, 0, t, v) = static_cast<S>(f.joints[v].x);
        out.at(n, 1, t, v) = static_cast<S>(f.joints[v].y);
        if (channels == 3) out.at(n, 2, t, v) = static_cast<S>(f.joints[v].confidence);
      }
    }
  }
  return out;
}

// Forward temporal difference: out[..,t,..] = x[..,t+1,..] - x[..,t,..],
// last frame zero so joint and motion tensors stay shape-aligned.
template <class S>
Tensor4<S> motion_stream(const Tensor4<S>& x) {
  if (x.shape.t < 2) {
    throw DataError("motion_stream: needs at least 2 frames, got " +
                    std::to_string(x.shape.t));
  }
  Tensor4<S> out(x.shape);
  const int v_len = x.shape.v;
  for (int n = 0; n < x.shape.n; ++n) {
    for (int c = 0; c < x.shape.c; ++c) {
      for (int t = 0; t + 1 < x.shape.t; ++t) {
        const S* cur = &x.data[x.index(n, c, t, 0)];
        const S* nxt = cur + v_len;
        S* dst = &out.data[out.index(n, c, t, 0)];
        for (int v = 0; v < v_len; ++v) dst[v] = nxt[v] - cur[v];
      }
    }
  }
  return out;
}

}  // namespace sdfa
