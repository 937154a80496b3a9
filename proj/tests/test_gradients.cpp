#include <doctest.h>

#include <cmath>
#include <functional>

#include "sdfa/model.hpp"
#include "sdfa/nn_ops.hpp"
#include "test_util.hpp"

using namespace sdfa;
using namespace sdfa::nn;
using namespace testutil;

namespace {

// A perturbable scalar group: values live in `values`, analytic gradients in
// `grads`, checked at `indices`.
struct TargetSet {
  AlignedBuffer<double>* values;
  AlignedBuffer<double>* grads;
  std::vector<std::size_t> indices;
};

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return idx;
}

// Central finite differences at step 1e-4 against the recorded backward.
// build(tape) must rebuild the graph from the current leaf/parameter values.
template <class Build>
double max_grad_error(Build&& build, const std::vector<TargetSet>& sets,
                      double step = 1e-4) {
  for (const auto& s : sets) std::fill(s.grads->begin(), s.grads->end(), 0.0);
  {
    Tape<double> tape;
    auto loss = build(tape);
    tape.backward(loss);
  }
  double worst = 0.0;
  for (const auto& s : sets) {
    for (std::size_t idx : s.indices) {
      const double analytic = (*s.grads)[idx];
      const double orig = (*s.values)[idx];
      double lp, lm;
      (*s.values)[idx] = orig + step;
      {
        Tape<double> tape;
        tape.recording = false;
        lp = build(tape)->value.data[0];
      }
      (*s.values)[idx] = orig - step;
      {
        Tape<double> tape;
        tape.recording = false;
        lm = build(tape)->value.data[0];
      }
      (*s.values)[idx] = orig;
      worst = std::max(worst, rel_err(analytic, (lp - lm) / (2.0 * step)));
    }
  }
  return worst;
}

TargetSet param_targets(Param<double>& p) {
  return {&p.value.data, &p.grad.data, all_indices(p.size())};
}

TargetSet leaf_targets(const Var<double>& leaf) {
  leaf->ensure_grad();
  return {&leaf->value.data, &leaf->grad.data, all_indices(leaf->value.size())};
}

Var<double> grad_leaf(Tensor4<double> value) {
  auto node = make_var(std::move(value), /*needs_grad=*/true);
  node->ensure_grad();
  return node;
}

}  // namespace

TEST_SUITE("gradients") {

TEST_CASE("conv1x1 gradients vs finite differences") {
  Rng rng(100);
  auto x = grad_leaf(random_tensor<double>({1, 2, 3, 4}, rng));
  auto w = random_param<double>({2, 2, 1, 1}, rng);
  auto b = random_param<double>({2, 1, 1, 1}, rng);
  auto r = random_tensor<double>({1, 2, 3, 4}, rng);
  auto build = [&](Tape<double>& tape) {
    return project_to_scalar(tape, conv1x1(tape, x, w, b), r);
  };
  CHECK(max_grad_error(build, {param_targets(w), param_targets(b), leaf_targets(x)}) <= 1e-4);
}

TEST_CASE("a parameter the loss ignores gets an exactly zero gradient") {
  Rng rng(101);
  auto x = grad_leaf(random_tensor<double>({1, 2, 2, 2}, rng));
  auto w = random_param<double>({2, 2, 1, 1}, rng);
  auto b = random_param<double>({2, 1, 1, 1}, rng);
  // projection that never reads output channel 1
  auto r = random_tensor<double>({1, 2, 2, 2}, rng);
  for (int t = 0; t < 2; ++t)
    for (int v = 0; v < 2; ++v) r.at(0, 1, t, v) = 0.0;
  w.zero_grad();
  b.zero_grad();
  Tape<double> tape;
  auto loss = project_to_scalar(tape, conv1x1(tape, x, w, b), r);
  tape.backward(loss);
  CHECK(w.grad.data[2] == 0.0);  // row 1 of the 2x2 weight
  CHECK(w.grad.data[3] == 0.0);
  CHECK(b.grad.data[1] == 0.0);
}

TEST_CASE("batchnorm gradients vs finite differences (train and eval)") {
  Rng rng(102);
  auto x = grad_leaf(random_tensor<double>({2, 3, 2, 3}, rng));
  BatchNorm<double> bn(3);
  bn.momentum = 0.0;  // keep running stats fixed across FD evaluations
  for (auto& g : bn.gamma.value.data) g = rng.uniform(0.5, 1.5);
  for (auto& b : bn.beta.value.data) b = rng.uniform(-0.5, 0.5);
  for (auto& m : bn.running_mean) m = rng.uniform(-0.3, 0.3);
  for (auto& v : bn.running_var) v = rng.uniform(0.5, 2.0);
  auto r = random_tensor<double>({2, 3, 2, 3}, rng);

  for (bool training : {true, false}) {
    CAPTURE(training);
    auto build = [&](Tape<double>& tape) {
      return project_to_scalar(tape, batchnorm(tape, x, bn, training), r);
    };
    CHECK(max_grad_error(build, {param_targets(bn.gamma), param_targets(bn.beta),
                                 leaf_targets(x)}) <= 1e-4);
  }
}

TEST_CASE("relu gradient vs finite differences") {
  Rng rng(103);
  // keep activations away from the kink at zero
  auto xv = random_tensor<double>({1, 2, 3, 3}, rng);
  for (auto& v : xv.data) v += v >= 0.0 ? 0.2 : -0.2;
  auto x = grad_leaf(xv);
  auto r = random_tensor<double>({1, 2, 3, 3}, rng);
  auto build = [&](Tape<double>& tape) {
    return project_to_scalar(tape, relu(tape, x), r);
  };
  CHECK(max_grad_error(build, {leaf_targets(x)}) <= 1e-4);
}

TEST_CASE("sep_temporal_conv gradients vs finite differences") {
  Rng rng(104);
  for (const auto& [k, stride] : {std::pair{3, 1}, std::pair{5, 2}}) {
    CAPTURE(k);
    CAPTURE(stride);
    auto x = grad_leaf(random_tensor<double>({2, 3, 6, 3}, rng));
    auto dw = random_param<double>({3, k, 1, 1}, rng);
    auto pw = random_param<double>({2, 3, 1, 1}, rng);
    auto r = random_tensor<double>({2, 2, (6 + stride - 1) / stride, 3}, rng);
    auto build = [&](Tape<double>& tape) {
      return project_to_scalar(tape, sep_temporal_conv(tape, x, dw, pw, stride), r);
    };
    CHECK(max_grad_error(build, {param_targets(dw), param_targets(pw),
                                 leaf_targets(x)}) <= 1e-4);
  }
}

TEST_CASE("pool gradients vs finite differences") {
  Rng rng(105);
  auto x = grad_leaf(random_tensor<double>({2, 2, 5, 4}, rng));
  SUBCASE("spatial max") {
    auto r = random_tensor<double>({2, 2, 5, 1}, rng);
    auto build = [&](Tape<double>& tape) {
      return project_to_scalar(tape, pool(tape, x, PoolKind::spatial_max), r);
    };
    CHECK(max_grad_error(build, {leaf_targets(x)}) <= 1e-4);
  }
  SUBCASE("temporal max stride 2") {
    auto r = random_tensor<double>({2, 2, 3, 4}, rng);
    auto build = [&](Tape<double>& tape) {
      return project_to_scalar(tape, pool(tape, x, PoolKind::temporal_max, 2), r);
    };
    CHECK(max_grad_error(build, {leaf_targets(x)}) <= 1e-4);
  }
  SUBCASE("global average") {
    auto r = random_tensor<double>({2, 2, 1, 1}, rng);
    auto build = [&](Tape<double>& tape) {
      return project_to_scalar(tape, pool(tape, x, PoolKind::global_avg), r);
    };
    CHECK(max_grad_error(build, {leaf_targets(x)}) <= 1e-4);
  }
}

TEST_CASE("joint_aggregate gradients reach the modulation matrix") {
  Rng rng(106);
  const int v = 4;
  std::vector<double> ahat(v * v);
  for (auto& a : ahat) a = rng.uniform() < 0.4 ? 0.0 : rng.uniform();
  auto m = random_param<double>({v, v, 1, 1}, rng);
  auto x = grad_leaf(random_tensor<double>({2, 3, 2, v}, rng));
  auto r = random_tensor<double>({2, 3, 2, v}, rng);
  auto build = [&](Tape<double>& tape) {
    return project_to_scalar(tape, joint_aggregate(tape, x, ahat, &m), r);
  };
  CHECK(max_grad_error(build, {param_targets(m), leaf_targets(x)}) <= 1e-4);
  // support zeros never receive gradient
  for (int i = 0; i < v * v; ++i) {
    if (ahat[i] == 0.0) CHECK(m.grad.data[i] == 0.0);
  }
}

TEST_CASE("scalar adjacency gate receives the summed support gradient") {
  Rng rng(111);
  const int v = 4;
  std::vector<double> ahat(v * v);
  for (auto& a : ahat) a = rng.uniform() < 0.4 ? 0.0 : rng.uniform();
  auto gate = random_param<double>({1, 1, 1, 1}, rng);
  auto x = grad_leaf(random_tensor<double>({2, 2, 3, v}, rng));
  auto r = random_tensor<double>({2, 2, 3, v}, rng);
  auto build = [&](Tape<double>& tape) {
    return project_to_scalar(tape, joint_aggregate(tape, x, ahat, &gate), r);
  };
  CHECK(max_grad_error(build, {param_targets(gate), leaf_targets(x)}) <= 1e-4);
}

TEST_CASE("block temporal mask gradient with a pinned window") {
  Rng rng(112);
  auto x = grad_leaf(random_tensor<double>({2, 2, 8, 3}, rng));
  auto r = random_tensor<double>({2, 2, 8, 3}, rng);
  auto build = [&](Tape<double>& tape) {
    Rng mask_rng(17);
    return project_to_scalar(tape,
                             block_temporal_mask(tape, x, 0.2, 0.25, true, mask_rng), r);
  };
  CHECK(max_grad_error(build, {leaf_targets(x)}) <= 1e-4);
}

TEST_CASE("softmax cross entropy gradient vs finite differences") {
  Rng rng(107);
  auto logits = grad_leaf(random_tensor<double>({3, 4, 1, 1}, rng));
  const std::vector<int> labels = {2, 0, 3};
  auto build = [&](Tape<double>& tape) {
    return softmax_cross_entropy(tape, logits, labels).loss;
  };
  CHECK(max_grad_error(build, {leaf_targets(logits)}) <= 1e-4);
}

TEST_CASE("random_st_mask gradient with a pinned mask pattern") {
  Rng rng(108);
  auto x = grad_leaf(random_tensor<double>({2, 2, 4, 3}, rng));
  auto r = random_tensor<double>({2, 2, 4, 3}, rng);
  auto build = [&](Tape<double>& tape) {
    Rng mask_rng(11);  // identical pattern on every evaluation
    return project_to_scalar(tape, random_st_mask(tape, x, 0.25, 0.25, true, mask_rng), r);
  };
  CHECK(max_grad_error(build, {leaf_targets(x)}) <= 1e-4);
}

TEST_CASE("composed sgcn block gradient (conv + aggregate + bn + residual)") {
  Rng rng(109);
  SkeletonGraph graph = build_graph(4, {{0, 1}, {1, 2}, {2, 3}});
  std::vector<double> ahat(graph.normalized.begin(), graph.normalized.end());

  SgcnBlockT<double> block{random_param<double>({3, 2, 1, 1}, rng),
                           random_param<double>({3, 1, 1, 1}, rng),
                           random_param<double>({4, 4, 1, 1}, rng),
                           random_param<double>({3, 2, 1, 1}, rng),
                           random_param<double>({3, 1, 1, 1}, rng),
                           BatchNorm<double>(3)};
  block.bn.momentum = 0.0;
  auto x = grad_leaf(random_tensor<double>({2, 2, 3, 4}, rng));
  auto r = random_tensor<double>({2, 3, 3, 4}, rng);
  auto build = [&](Tape<double>& tape) {
    auto out = sgcn_block(tape, x, block, ahat, true, nullptr);
    return project_to_scalar(tape, out, r);
  };
  CHECK(max_grad_error(build,
                       {param_targets(block.w), param_targets(block.b),
                        param_targets(*block.modulation), param_targets(*block.proj_w),
                        param_targets(*block.proj_b), param_targets(block.bn.gamma),
                        param_targets(block.bn.beta), leaf_targets(x)}) <= 1e-3);
}

TEST_CASE("end-to-end tiny model gradient vs finite differences") {
  Rng rng(110);
  ModelConfig config;
  config.channels = {4, 4, 4};
  config.p_joint = 0.05;
  config.p_frame = 0.05;
  auto model = build_model<double>(config, 42);
  // freeze BN running statistics so repeated forwards agree
  for (auto* bn : {&model.joint_encoder->bn, &model.motion_encoder->bn,
                   &model.sgcn1.bn, &model.sgcn2.bn, &model.septcn1.bn,
                   &model.septcn2.bn}) {
    bn->momentum = 0.0;
  }

  Tensor4<double> input = random_tensor<double>({2, 3, 8, 25}, rng);
  const std::vector<int> labels = {1, 0};
  auto build = [&](Tape<double>& tape) {
    Rng mask_rng(7);  // same mask pattern on every evaluation
    auto logits = forward(tape, model, make_input(input), true, &mask_rng);
    return softmax_cross_entropy(tape, logits, labels).loss;
  };

  // >= 20 randomly chosen parameters spread over every tensor
  auto params = model.parameters();
  std::vector<TargetSet> sets;
  Rng pick(55);
  int chosen = 0;
  for (auto& [name, p] : params) {
    TargetSet s{&p->value.data, &p->grad.data, {}};
    const int per_tensor = 1 + static_cast<int>(pick.below(2));
    for (int i = 0; i < per_tensor; ++i) {
      s.indices.push_back(static_cast<std::size_t>(pick.below(p->size())));
      ++chosen;
    }
    sets.push_back(s);
  }
  CHECK(chosen >= 20);
  CHECK(max_grad_error(build, sets) <= 1e-3);
}

}  // TEST_SUITE
