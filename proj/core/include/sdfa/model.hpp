#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sdfa/graph.hpp"
#include "sdfa/nn.hpp"
#include "sdfa/nn_ops.hpp"
#include "sdfa/preprocess.hpp"
#include "sdfa/rng.hpp"

namespace sdfa {

enum class FusionMode { joint_only, motion_only, early_fused };

std::string to_string(FusionMode mode);
FusionMode fusion_from_string(const std::string& s);
std::string to_string(AdjacencyNorm norm);
AdjacencyNorm adjacency_norm_from_string(const std::string& s);

struct ModelConfig {
  int in_channels = 3;                      // (x, y, confidence); 2 drops confidence
  std::array<int, 3> channels = {64, 128, 256};
  std::array<int, 2> tcn_kernels = {3, 5};
  std::array<int, 2> tcn_strides = {1, 2};
  int num_classes = 2;
  double p_joint = 0.05;
  double p_frame = 0.05;
  bool learnable_adjacency = true;
  // Ablation variants: a single learnable gate on the whole adjacency instead
  // of the full VxV matrix, and contiguous-window frame masking instead of
  // disjoint frames.
  bool scalar_adjacency_gate = false;
  bool block_masking = false;
  FusionMode fusion = FusionMode::early_fused;
  AdjacencyNorm adjacency_norm = AdjacencyNorm::row;

  void validate() const {
    for (int c : channels) {
      if (c <= 0) throw ConfigError("model: channel widths must be positive");
    }
    for (int k : tcn_kernels) {
      if (k <= 0 || k % 2 == 0) throw ConfigError("model: tcn kernels must be odd and positive");
    }
    for (int s : tcn_strides) {
      if (s != 1 && s != 2) throw ConfigError("model: tcn strides must be 1 or 2");
    }
    if (in_channels <= 0) throw ConfigError("model: in_channels must be positive");
    if (num_classes < 2) throw ConfigError("model: num_classes must be >= 2");
    if (p_joint < 0.0 || p_joint >= 1.0 || p_frame < 0.0 || p_frame >= 1.0) {
      throw ConfigError("model: mask probabilities must lie in [0,1)");
    }
  }
};

// One input-stream encoder: BN over raw channels, then a 1x1 projection into
// the shared feature space.
template <class S>
struct EncoderT {
  nn::BatchNorm<S> bn;
  nn::Param<S> w, b;
};

template <class S>
struct SgcnBlockT {
  nn::Param<S> w, b;                         // channel transform
  std::optional<nn::Param<S>> modulation;    // ones-initialized M
  std::optional<nn::Param<S>> proj_w, proj_b;  // residual channel matching
  nn::BatchNorm<S> bn;
};

template <class S>
struct SepTcnBlockT {
  nn::Param<S> dw, pw;
  nn::BatchNorm<S> bn;
  int kernel = 3;
  int stride = 1;
};

// Named view of a state tensor (parameter or running statistic), used by the
// optimizer, the counters and checkpoint IO. Enumeration order is fixed.
template <class S>
struct TensorRef {
  std::string name;
  AlignedBuffer<S>* data;
  Shape4 shape;
  bool learnable;
};

template <class S>
struct SdfaModelT {
  ModelConfig config;
  SkeletonGraph graph;
  std::vector<S> ahat;  // graph.normalized in working precision

  std::optional<EncoderT<S>> joint_encoder, motion_encoder;
  SgcnBlockT<S> sgcn1, sgcn2;
  SepTcnBlockT<S> septcn1, septcn2;
  nn::Param<S> head_w, head_b;

  std::vector<std::pair<std::string, nn::Param<S>*>> parameters();
  std::vector<TensorRef<S>> state();
  void zero_grad() {
    for (auto& [name, p] : parameters()) p->zero_grad();
  }
};

using SdfaModel = SdfaModelT<float>;

// --------------------------------------------------------------------------
// Construction. Initialization is a pure function of (config, seed, graph):
// conv and linear weights are uniform in +/-sqrt(1/fan_in) drawn in a fixed
// enumeration order, biases start at zero, M at ones, BN at gamma=1/beta=0.
// --------------------------------------------------------------------------
template <class S>
SdfaModelT<S> build_model(const ModelConfig& config, std::uint64_t seed,
                          const SkeletonGraph& graph);

template <class S>
SdfaModelT<S> build_model(const ModelConfig& config, std::uint64_t seed) {
  return build_model<S>(config, seed, build_body25_graph(config.adjacency_norm));
}

// --------------------------------------------------------------------------
// Forward pieces. Blocks append to the tape; rng is only touched when
// training (masking draws joint decisions first, then frame decisions).
// --------------------------------------------------------------------------
// Masking settings the blocks apply after their activations when training.
struct MaskSpec {
  double p_joint = 0.0;
  double p_frame = 0.0;
  bool block_frames = false;
};

template <class S>
nn::Var<S> fuse_streams(nn::Tape<S>& tape, const nn::Var<S>& xj,
                        SdfaModelT<S>& model, bool training);

template <class S>
nn::Var<S> sgcn_block(nn::Tape<S>& tape, const nn::Var<S>& x, SgcnBlockT<S>& block,
                      const std::vector<S>& ahat, bool training, Rng* rng,
                      const MaskSpec& mask = {});

template <class S>
nn::Var<S> sep_tcn_block(nn::Tape<S>& tape, const nn::Var<S>& x,
                         SepTcnBlockT<S>& block, bool training, Rng* rng,
                         const MaskSpec& mask = {});

// Full network: fuse -> sgcn1 -> sgcn2 -> septcn1 -> septcn2 -> global avg
// pool -> linear head. Returns (N, num_classes, 1, 1) logits.
template <class S>
nn::Var<S> forward(nn::Tape<S>& tape, SdfaModelT<S>& model, const nn::Var<S>& xj,
                   bool training, Rng* rng = nullptr);

// Deterministic eval-mode forward on a plain tensor (no tape bookkeeping).
template <class S>
Tensor4<S> forward_eval(SdfaModelT<S>& model, const Tensor4<S>& x);

// --------------------------------------------------------------------------
// Analytic complexity counters.
// --------------------------------------------------------------------------
template <class S>
std::size_t count_params(SdfaModelT<S>& model);

// Multiply-accumulate count for one sample of shape (in_channels, frames,
// joints). Only conv/aggregation/head MACs are counted, matching the usual
// convention for convolutional models.
template <class S>
std::size_t count_flops(SdfaModelT<S>& model, int in_channels, int frames,
                        int joints);

// ===========================================================================
// Implementation
// ===========================================================================

inline std::string to_string(FusionMode mode) {
  switch (mode) {
    case FusionMode::joint_only: return "joint";
    case FusionMode::motion_only: return "motion";
    case FusionMode::early_fused: return "early_fused";
  }
  return "early_fused";
}

inline FusionMode fusion_from_string(const std::string& s) {
  if (s == "joint") return FusionMode::joint_only;
  if (s == "motion") return FusionMode::motion_only;
  if (s == "early_fused" || s == "fused") return FusionMode::early_fused;
  throw ConfigError("unknown fusion mode '" + s + "'");
}

inline std::string to_string(AdjacencyNorm norm) {
  return norm == AdjacencyNorm::row ? "row" : "symmetric";
}

inline AdjacencyNorm adjacency_norm_from_string(const std::string& s) {
  if (s == "row") return AdjacencyNorm::row;
  if (s == "symmetric") return AdjacencyNorm::symmetric;
  throw ConfigError("unknown adjacency normalization '" + s + "'");
}

template <class S>
std::vector<std::pair<std::string, nn::Param<S>*>> SdfaModelT<S>::parameters() {
  std::vector<std::pair<std::string, nn::Param<S>*>> out;
  auto add_encoder = [&out](const std::string& prefix, std::optional<EncoderT<S>>& e) {
    if (!e) return;
    out.emplace_back(prefix + ".bn.gamma", &e->bn.gamma);
    out.emplace_back(prefix + ".bn.beta", &e->bn.beta);
    out.emplace_back(prefix + ".w", &e->w);
    out.emplace_back(prefix + ".b", &e->b);
  };
  auto add_sgcn = [&out](const std::string& prefix, SgcnBlockT<S>& blk) {
    out.emplace_back(prefix + ".w", &blk.w);
    out.emplace_back(prefix + ".b", &blk.b);
    if (blk.modulation) out.emplace_back(prefix + ".modulation", &*blk.modulation);
    if (blk.proj_w) out.emplace_back(prefix + ".proj_w", &*blk.proj_w);
    if (blk.proj_b) out.emplace_back(prefix + ".proj_b", &*blk.proj_b);
    out.emplace_back(prefix + ".bn.gamma", &blk.bn.gamma);
    out.emplace_back(prefix + ".bn.beta", &blk.bn.beta);
  };
  auto add_tcn = [&out](const std::string& prefix, SepTcnBlockT<S>& blk) {
    out.emplace_back(prefix + ".dw", &blk.dw);
    out.emplace_back(prefix + ".pw", &blk.pw);
    out.emplace_back(prefix + ".bn.gamma", &blk.bn.gamma);
    out.emplace_back(prefix + ".bn.beta", &blk.bn.beta);
  };
  add_encoder("joint_encoder", joint_encoder);
  add_encoder("motion_encoder", motion_encoder);
  add_sgcn("sgcn1", sgcn1);
  add_sgcn("sgcn2", sgcn2);
  add_tcn("septcn1", septcn1);
  add_tcn("septcn2", septcn2);
  out.emplace_back("head.w", &head_w);
  out.emplace_back("head.b", &head_b);
  return out;
}

template <class S>
std::vector<TensorRef<S>> SdfaModelT<S>::state() {
  std::vector<TensorRef<S>> out;
  for (auto& [name, p] : parameters()) {
    out.push_back({name, &p->value.data, p->value.shape, true});
  }
  auto add_running = [&out](const std::string& prefix, nn::BatchNorm<S>& bn) {
    Shape4 shape{bn.channels(), 1, 1, 1};
    out.push_back({prefix + ".bn.running_mean", &bn.running_mean, shape, false});
    out.push_back({prefix + ".bn.running_var", &bn.running_var, shape, false});
  };
  if (joint_encoder) add_running("joint_encoder", joint_encoder->bn);
  if (motion_encoder) add_running("motion_encoder", motion_encoder->bn);
  add_running("sgcn1", sgcn1.bn);
  add_running("sgcn2", sgcn2.bn);
  add_running("septcn1", septcn1.bn);
  add_running("septcn2", septcn2.bn);
  return out;
}

template <class S>
SdfaModelT<S> build_model(const ModelConfig& config, std::uint64_t seed,
                          const SkeletonGraph& graph) {
  config.validate();
  const int v = graph.num_joints;
  const auto [c1, c2, c3] = config.channels;

  SdfaModelT<S> model;
  model.config = config;
  model.graph = graph;
  model.ahat.resize(graph.normalized.size());
  for (std::size_t i = 0; i < model.ahat.size(); ++i) {
    model.ahat[i] = static_cast<S>(graph.normalized[i]);
  }

  auto make_encoder = [&]() {
    EncoderT<S> e{nn::BatchNorm<S>(config.in_channels),
                  nn::Param<S>::matrix(c1, config.in_channels), nn::Param<S>::vec(c1)};
    return e;
  };
  if (config.fusion != FusionMode::motion_only) model.joint_encoder = make_encoder();
  if (config.fusion != FusionMode::joint_only) model.motion_encoder = make_encoder();

  auto make_sgcn = [&](int cin, int cout) {
    SgcnBlockT<S> blk{nn::Param<S>::matrix(cout, cin), nn::Param<S>::vec(cout),
                      std::nullopt, std::nullopt, std::nullopt, nn::BatchNorm<S>(cout)};
    if (config.learnable_adjacency) {
      blk.modulation = config.scalar_adjacency_gate ? nn::Param<S>::matrix(1, 1)
                                                    : nn::Param<S>::matrix(v, v);
      blk.modulation->value.fill(S(1));
    }
    if (cin != cout) {
      blk.proj_w = nn::Param<S>::matrix(cout, cin);
      blk.proj_b = nn::Param<S>::vec(cout);
    }
    return blk;
  };
  model.sgcn1 = make_sgcn(c1, c2);
  model.sgcn2 = make_sgcn(c2, c3);

  model.septcn1 = SepTcnBlockT<S>{nn::Param<S>::matrix(c3, config.tcn_kernels[0]),
                                  nn::Param<S>::matrix(c3, c3), nn::BatchNorm<S>(c3),
                                  config.tcn_kernels[0], config.tcn_strides[0]};
  model.septcn2 = SepTcnBlockT<S>{nn::Param<S>::matrix(c3, config.tcn_kernels[1]),
                                  nn::Param<S>::matrix(c3, c3), nn::BatchNorm<S>(c3),
                                  config.tcn_kernels[1], config.tcn_strides[1]};
  model.head_w = nn::Param<S>::matrix(config.num_classes, c3);
  model.head_b = nn::Param<S>::vec(config.num_classes);

  // Weight init in fixed order; biases, M and BN keep their constructed values.
  Rng rng(seed);
  auto init_uniform = [&rng](nn::Param<S>& p, int fan_in) {
    const double bound = std::sqrt(1.0 / fan_in);
    for (S& x : p.value.data) x = static_cast<S>(rng.uniform(-bound, bound));
  };
  if (model.joint_encoder) init_uniform(model.joint_encoder->w, config.in_channels);
  if (model.motion_encoder) init_uniform(model.motion_encoder->w, config.in_channels);
  init_uniform(model.sgcn1.w, c1);
  if (model.sgcn1.proj_w) init_uniform(*model.sgcn1.proj_w, c1);
  init_uniform(model.sgcn2.w, c2);
  if (model.sgcn2.proj_w) init_uniform(*model.sgcn2.proj_w, c2);
  init_uniform(model.septcn1.dw, model.septcn1.kernel);
  init_uniform(model.septcn1.pw, c3);
  init_uniform(model.septcn2.dw, model.septcn2.kernel);
  init_uniform(model.septcn2.pw, c3);
  init_uniform(model.head_w, c3);
  return model;
}

template <class S>
nn::Var<S> fuse_streams(nn::Tape<S>& tape, const nn::Var<S>& xj,
                        SdfaModelT<S>& model, bool training) {
  const ModelConfig& cfg = model.config;
  if (xj->value.shape.c != cfg.in_channels) {
    throw ShapeError("fuse_streams: expected " + std::to_string(cfg.in_channels) +
                     " input channels, got " + std::to_string(xj->value.shape.c));
  }
  nn::Var<S> joint_out, motion_out;
  if (model.joint_encoder) {
    auto h = nn::batchnorm(tape, xj, model.joint_encoder->bn, training);
    joint_out = nn::conv1x1(tape, h, model.joint_encoder->w, model.joint_encoder->b);
  }
  if (model.motion_encoder) {
    auto xm = nn::make_input(motion_stream(xj->value));
    auto h = nn::batchnorm(tape, xm, model.motion_encoder->bn, training);
    motion_out = nn::conv1x1(tape, h, model.motion_encoder->w, model.motion_encoder->b);
  }
  if (joint_out && motion_out) return nn::add(tape, joint_out, motion_out);
  return joint_out ? joint_out : motion_out;
}

template <class S>
nn::Var<S> apply_mask(nn::Tape<S>& tape, const nn::Var<S>& x, bool training,
                      Rng* rng, const MaskSpec& mask) {
  if (!training || rng == nullptr) return x;
  if (mask.block_frames) {
    return nn::block_temporal_mask(tape, x, mask.p_joint, mask.p_frame, training, *rng);
  }
  return nn::random_st_mask(tape, x, mask.p_joint, mask.p_frame, training, *rng);
}

template <class S>
nn::Var<S> sgcn_block(nn::Tape<S>& tape, const nn::Var<S>& x, SgcnBlockT<S>& block,
                      const std::vector<S>& ahat, bool training, Rng* rng,
                      const MaskSpec& mask) {
  const int v = x->value.shape.v;
  if (ahat.size() != static_cast<std::size_t>(v) * v) {
    throw ShapeError("sgcn_block: tensor has " + std::to_string(v) +
                     " joints but the graph does not");
  }
  auto f1 = nn::conv1x1(tape, x, block.w, block.b);
  auto h = nn::joint_aggregate(tape, f1, ahat,
                               block.modulation ? &*block.modulation : nullptr);
  auto hb = nn::batchnorm(tape, h, block.bn, training);

  nn::Var<S> res_in = x;
  if (block.proj_w) res_in = nn::conv1x1(tape, x, *block.proj_w, *block.proj_b);
  auto pooled = nn::pool(tape, res_in, nn::PoolKind::spatial_max);
  auto res = nn::broadcast_joints(tape, pooled, v);

  auto out = nn::relu(tape, nn::add(tape, hb, res));
  return apply_mask(tape, out, training, rng, mask);
}

template <class S>
nn::Var<S> sep_tcn_block(nn::Tape<S>& tape, const nn::Var<S>& x,
                         SepTcnBlockT<S>& block, bool training, Rng* rng,
                         const MaskSpec& mask) {
  auto y = nn::sep_temporal_conv(tape, x, block.dw, block.pw, block.stride);
  auto yb = nn::batchnorm(tape, y, block.bn, training);
  auto res = nn::pool(tape, x, nn::PoolKind::temporal_max, block.stride);
  auto out = nn::relu(tape, nn::add(tape, yb, res));
  return apply_mask(tape, out, training, rng, mask);
}

template <class S>
nn::Var<S> forward(nn::Tape<S>& tape, SdfaModelT<S>& model, const nn::Var<S>& xj,
                   bool training, Rng* rng) {
  if (training && rng == nullptr) {
    throw UsageError("forward: training mode needs an rng for masking");
  }
  const MaskSpec mask{model.config.p_joint, model.config.p_frame,
                      model.config.block_masking};
  auto h = fuse_streams(tape, xj, model, training);
  h = sgcn_block(tape, h, model.sgcn1, model.ahat, training, rng, mask);
  h = sgcn_block(tape, h, model.sgcn2, model.ahat, training, rng, mask);
  h = sep_tcn_block(tape, h, model.septcn1, training, rng, mask);
  h = sep_tcn_block(tape, h, model.septcn2, training, rng, mask);
  auto g = nn::pool(tape, h, nn::PoolKind::global_avg);
  return nn::conv1x1(tape, g, model.head_w, model.head_b);
}

template <class S>
Tensor4<S> forward_eval(SdfaModelT<S>& model, const Tensor4<S>& x) {
  nn::Tape<S> tape;
  tape.recording = false;
  auto logits = forward(tape, model, nn::make_input(x), /*training=*/false);
  return logits->value;
}

template <class S>
std::size_t count_params(SdfaModelT<S>& model) {
  std::size_t total = 0;
  for (auto& [name, p] : model.parameters()) total += p->size();
  return total;
}

template <class S>
std::size_t count_flops(SdfaModelT<S>& model, int in_channels, int frames,
                        int joints) {
  const ModelConfig& cfg = model.config;
  if (in_channels != cfg.in_channels) {
    throw ShapeError("count_flops: input channels do not match the model");
  }
  if (joints != model.graph.num_joints) {
    throw ShapeError("count_flops: joint count does not match the model graph");
  }
  const auto [c1, c2, c3] = cfg.channels;
  const std::size_t t = frames, v = joints;
  std::size_t macs = 0;

  // stream encoders (1x1 convs; BN and elementwise ops are not MACs)
  const std::size_t encoder = static_cast<std::size_t>(c1) * in_channels * t * v;
  if (model.joint_encoder) macs += encoder;
  if (model.motion_encoder) macs += encoder;

  auto sgcn = [&](int cin, int cout, bool projected) {
    std::size_t m = static_cast<std::size_t>(cout) * cin * t * v;  // transform
    m += static_cast<std::size_t>(v) * v * cout * t;               // aggregation
    if (projected) m += static_cast<std::size_t>(cout) * cin * t * v;
    return m;
  };
  macs += sgcn(c1, c2, model.sgcn1.proj_w.has_value());
  macs += sgcn(c2, c3, model.sgcn2.proj_w.has_value());

  std::size_t t_cur = t;
  for (const SepTcnBlockT<S>* blk : {&model.septcn1, &model.septcn2}) {
    const std::size_t t_out = (t_cur + blk->stride - 1) / blk->stride;
    macs += static_cast<std::size_t>(c3) * blk->kernel * t_out * v;  // depthwise
    macs += static_cast<std::size_t>(c3) * c3 * t_out * v;           // pointwise
    t_cur = t_out;
  }

  macs += static_cast<std::size_t>(cfg.num_classes) * c3;  // head
  return macs;
}

}  // namespace sdfa
