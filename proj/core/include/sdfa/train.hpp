#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sdfa/metrics.hpp"
#include "sdfa/model.hpp"
#include "sdfa/split.hpp"

namespace sdfa {

struct TrainConfig {
  double lr0 = 0.01;
  double momentum = 0.9;
  int epochs = 50;
  double decay_factor = 0.9;  // applied every decay_every epochs
  int decay_every = 10;
  int batch_size = 16;
  std::uint64_t seed = 0;

  void validate() const {
    if (lr0 <= 0.0) throw ConfigError("train: lr0 must be positive");
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("train: momentum must lie in [0,1)");
    if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (decay_every < 1) throw ConfigError("train: decay_every must be >= 1");
    if (decay_factor <= 0.0) throw ConfigError("train: decay_factor must be positive");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  }
};

// Step schedule: lr0 * decay_factor^floor(epoch / decay_every).
inline double lr_at(int epoch, const TrainConfig& cfg) {
  return cfg.lr0 * std::pow(cfg.decay_factor, epoch / cfg.decay_every);
}

// Classic momentum: v <- momentum*v + g; p <- p - lr*v.
template <class S>
void sgd_step(nn::Param<S>& p, S lr, S momentum) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    p.velocity.data[i] = momentum * p.velocity.data[i] + p.grad.data[i];
    p.value.data[i] -= lr * p.velocity.data[i];
  }
}

struct EpochStats {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double train_acc = 0.0;
};

struct TrainResult {
  std::vector<EpochStats> history;
};

// Binary training label: 1 for falls, 0 otherwise.
inline int label_of(const SkeletonSequence& seq) { return seq.meta.is_fall ? 1 : 0; }

// SGD-momentum loop over the train partition. Batches are reshuffled each
// epoch from the config seed; masking is active; everything is a
// deterministic function of (model, data order, config).
TrainResult train(SdfaModel& model, const std::vector<SkeletonSequence>& dataset,
                  const Split& split, const TrainConfig& cfg);

// Eval-mode fall-class probability per selected sample.
std::vector<double> predict_scores(SdfaModel& model,
                                   const std::vector<SkeletonSequence>& dataset,
                                   const std::vector<int>& indices,
                                   int batch_size = 32);

// History file: per-epoch "epoch lr train_loss train_acc" table.
void write_history(const std::filesystem::path& path,
                   const std::vector<EpochStats>& history);

// One evaluation record per row, metric columns in the usual report order
// (specificity, recall, precision, fp_rate, f1, auc, accuracy).
struct EvalRecord {
  std::string protocol;
  int fold = 0;
  MetricsReport metrics;
  std::string config_digest;
  std::uint64_t seed = 0;
};

void write_results(const std::filesystem::path& path,
                   const std::vector<EvalRecord>& records);
std::string format_results(const std::vector<EvalRecord>& records);

}  // namespace sdfa
