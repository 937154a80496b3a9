// Microbenchmarks for the layer kernels and the end-to-end network.
// Run: ./sdfa_benchmarks [--benchmark_filter=...]

#include <benchmark/benchmark.h>

#include "sdfa/model.hpp"
#include "sdfa/nn_ops.hpp"
#include "sdfa/runtime.hpp"
#include "sdfa/train.hpp"

using namespace sdfa;
using namespace sdfa::nn;

namespace {

Tensor4<float> random_tensor(Shape4 shape, std::uint64_t seed) {
  Rng rng(seed);
  Tensor4<float> t(shape);
  for (auto& v : t.data) v = static_cast<float>(rng.normal());
  return t;
}

void BM_Conv1x1(benchmark::State& state) {
  const int cin = static_cast<int>(state.range(0));
  const int cout = 2 * cin;
  Rng rng(1);
  auto x = make_input(random_tensor({1, cin, 300, 25}, 2));
  auto w = Param<float>::matrix(cout, cin);
  auto b = Param<float>::vec(cout);
  for (auto& v : w.value.data) v = static_cast<float>(rng.normal(0.0, 0.1));
  Tape<float> tape;
  tape.recording = false;
  for (auto _ : state) {
    auto y = conv1x1(tape, x, w, b);
    benchmark::DoNotOptimize(y->value.data.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(cout) *
                          cin * 300 * 25);
}
BENCHMARK(BM_Conv1x1)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_JointAggregate(benchmark::State& state) {
  auto model = build_model<float>(ModelConfig{}, 1);
  auto x = make_input(random_tensor({1, 256, 300, 25}, 3));
  Tape<float> tape;
  tape.recording = false;
  for (auto _ : state) {
    auto y = joint_aggregate(tape, x, model.ahat, &*model.sgcn2.modulation);
    benchmark::DoNotOptimize(y->value.data.data());
  }
}
BENCHMARK(BM_JointAggregate)->Unit(benchmark::kMillisecond);

void BM_SepTemporalConv(benchmark::State& state) {
  const int stride = static_cast<int>(state.range(0));
  auto model = build_model<float>(ModelConfig{}, 1);
  auto& block = stride == 1 ? model.septcn1 : model.septcn2;
  auto x = make_input(random_tensor({1, 256, 300, 25}, 4));
  Tape<float> tape;
  tape.recording = false;
  for (auto _ : state) {
    auto y = sep_temporal_conv(tape, x, block.dw, block.pw, stride);
    benchmark::DoNotOptimize(y->value.data.data());
  }
}
BENCHMARK(BM_SepTemporalConv)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

void BM_ForwardEval(benchmark::State& state) {
  auto model = build_model<float>(ModelConfig{}, 1);
  auto x = random_tensor({1, 3, static_cast<int>(state.range(0)), 25}, 5);
  forward_eval(model, x);  // warm-up
  for (auto _ : state) {
    auto logits = forward_eval(model, x);
    benchmark::DoNotOptimize(logits.data.data());
  }
}
BENCHMARK(BM_ForwardEval)->Arg(300)->Arg(150)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  auto model = build_model<float>(ModelConfig{}, 1);
  auto x = random_tensor({static_cast<int>(state.range(0)), 3, 48, 25}, 6);
  std::vector<int> labels(state.range(0));
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i % 2;
  Rng rng(7);
  for (auto _ : state) {
    model.zero_grad();
    Tape<float> tape;
    auto logits = forward(tape, model, make_input(x), true, &rng);
    auto res = softmax_cross_entropy(tape, logits, labels);
    tape.backward(res.loss);
    for (auto& [name, p] : model.parameters()) {
      sgd_step(*p, 0.01f, 0.9f);
    }
    benchmark::DoNotOptimize(res.loss->value.data[0]);
  }
}
BENCHMARK(BM_TrainStep)->Arg(16)->Unit(benchmark::kMillisecond);

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  benchmark::Initialize(&argc, argv);
  benchmark::RunSpecifiedBenchmarks();
  return 0;
}
