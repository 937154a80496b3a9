#include "sdfa/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace sdfa {

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) {
    throw DataError("roc_auc: " + std::to_string(scores.size()) + " scores vs " +
                    std::to_string(labels.size()) + " labels");
  }
  long n_pos = 0, n_neg = 0;
  for (int l : labels) (l != 0 ? n_pos : n_neg)++;
  if (n_pos == 0 || n_neg == 0) {
    throw DataError("roc_auc undefined: labels contain a single class");
  }

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Average ranks over tie groups, then sum positive ranks.
  double rank_pos_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j + 1);  // 1-based
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]] != 0) rank_pos_sum += avg_rank;
    }
    i = j + 1;
  }
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (rank_pos_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

MetricsReport compute_metrics(const std::vector<double>& scores,
                              const std::vector<int>& labels, double threshold) {
  if (scores.empty() || scores.size() != labels.size()) {
    throw DataError("compute_metrics: needs equal-length nonempty scores and labels");
  }
  MetricsReport r;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    const bool actual = labels[i] != 0;
    if (actual && predicted) r.tp++;
    else if (actual && !predicted) r.fn++;
    else if (!actual && predicted) r.fp++;
    else r.tn++;
  }

  auto ratio = [&r](long num, long den) {
    if (den == 0) {
      r.degenerate = true;
      return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
  };
  r.specificity = ratio(r.tn, r.tn + r.fp);
  r.recall = ratio(r.tp, r.tp + r.fn);
  r.precision = ratio(r.tp, r.tp + r.fp);
  r.fp_rate = ratio(r.fp, r.fp + r.tn);
  r.f1 = (r.precision + r.recall > 0.0)
             ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
             : (r.degenerate = true, 0.0);
  r.accuracy = ratio(r.tp + r.tn, r.tp + r.tn + r.fp + r.fn);

  const bool has_pos = (r.tp + r.fn) > 0, has_neg = (r.tn + r.fp) > 0;
  if (has_pos && has_neg) {
    r.auc = roc_auc(scores, labels);
  } else {
    r.auc = 0.0;
    r.degenerate = true;
  }
  return r;
}

}  // namespace sdfa
