#include "sdfa/train.hpp"

#include <fstream>
#include <sstream>

#include "sdfa/preprocess.hpp"

namespace sdfa {

namespace {

// Gathers a batch as an (n, C, T, V) tensor plus labels.
std::pair<Tensor4<float>, std::vector<int>> gather_batch(
    const std::vector<SkeletonSequence>& dataset, const std::vector<int>& indices,
    std::size_t begin, std::size_t end, int channels) {
  std::vector<SkeletonSequence> seqs;
  std::vector<int> labels;
  seqs.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) {
    seqs.push_back(dataset[indices[i]]);
    labels.push_back(label_of(dataset[indices[i]]));
  }
  return {to_feature_tensor<float>(seqs, channels), std::move(labels)};
}

}  // namespace

TrainResult train(SdfaModel& model, const std::vector<SkeletonSequence>& dataset,
                  const Split& split, const TrainConfig& cfg) {
  cfg.validate();
  if (split.train.empty()) throw TrainError("empty train split");
  for (int idx : split.train) {
    if (idx < 0 || idx >= static_cast<int>(dataset.size())) {
      throw TrainError("train split index " + std::to_string(idx) + " out of range");
    }
  }

  const int channels = model.config.in_channels;
  Rng rng(cfg.seed);
  std::vector<int> order = split.train;

  TrainResult result;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const float lr = static_cast<float>(lr_at(epoch, cfg));
    rng.shuffle(order);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      auto [batch, labels] = gather_batch(dataset, order, start, stop, channels);

      model.zero_grad();
      nn::Tape<float> tape;
      auto x = nn::make_input(std::move(batch));
      auto logits = forward(tape, model, x, /*training=*/true, &rng);
      auto [loss, probs] = nn::softmax_cross_entropy(tape, logits, labels);
      tape.backward(loss);

      for (auto& [name, p] : model.parameters()) {
        sgd_step(*p, lr, static_cast<float>(cfg.momentum));
      }

      loss_sum += static_cast<double>(loss->value.data[0]) * labels.size();
      for (std::size_t i = 0; i < labels.size(); ++i) {
        int best = 0;
        for (int k = 1; k < model.config.num_classes; ++k) {
          if (probs.at(static_cast<int>(i), k, 0, 0) >
              probs.at(static_cast<int>(i), best, 0, 0)) {
            best = k;
          }
        }
        if (best == labels[i]) ++correct;
      }
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.lr = lr;
    stats.train_loss = loss_sum / static_cast<double>(order.size());
    stats.train_acc = static_cast<double>(correct) / static_cast<double>(order.size());
    result.history.push_back(stats);
  }
  return result;
}

std::vector<double> predict_scores(SdfaModel& model,
                                   const std::vector<SkeletonSequence>& dataset,
                                   const std::vector<int>& indices, int batch_size) {
  if (batch_size < 1) throw ConfigError("predict_scores: batch_size must be >= 1");
  std::vector<double> scores;
  scores.reserve(indices.size());
  for (std::size_t start = 0; start < indices.size();
       start += static_cast<std::size_t>(batch_size)) {
    const std::size_t stop =
        std::min(indices.size(), start + static_cast<std::size_t>(batch_size));
    auto [batch, labels] = gather_batch(dataset, indices, start, stop,
                                        model.config.in_channels);
    Tensor4<float> logits = forward_eval(model, batch);
    Tensor4<float> probs = nn::softmax_probs(logits);
    for (int n = 0; n < probs.shape.n; ++n) {
      scores.push_back(static_cast<double>(probs.at(n, 1, 0, 0)));
    }
  }
  return scores;
}

void write_history(const std::filesystem::path& path,
                   const std::vector<EpochStats>& history) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "epoch\tlr\ttrain_loss\ttrain_acc\n";
  for (const auto& e : history) {
    out << e.epoch << "\t" << e.lr << "\t" << e.train_loss << "\t" << e.train_acc
        << "\n";
  }
}

std::string format_results(const std::vector<EvalRecord>& records) {
  std::ostringstream out;
  out << "protocol\tfold\tspecificity\trecall\tprecision\tfp_rate\tf1\tauc\t"
         "accuracy\tconfig_digest\tseed\n";
  out.setf(std::ios::fixed);
  out.precision(6);
  for (const auto& r : records) {
    const MetricsReport& m = r.metrics;
    out << r.protocol << "\t" << r.fold << "\t" << m.specificity << "\t" << m.recall
        << "\t" << m.precision << "\t" << m.fp_rate << "\t" << m.f1 << "\t" << m.auc
        << "\t" << m.accuracy << "\t" << r.config_digest << "\t" << r.seed << "\n";
  }
  return out.str();
}

void write_results(const std::filesystem::path& path,
                   const std::vector<EvalRecord>& records) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << format_results(records);
}

}  // namespace sdfa
