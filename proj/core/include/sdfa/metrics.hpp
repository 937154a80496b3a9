#pragma once

#include <vector>

#include "sdfa/errors.hpp"

namespace sdfa {

// Binary confusion metrics with fall as the positive class. `degenerate` is
// set when an empty denominator forced a metric to its defined fallback 0,
// or when AUC was undefined (single-class labels).
struct MetricsReport {
  long tp = 0, fp = 0, tn = 0, fn = 0;
  double specificity = 0.0;
  double recall = 0.0;
  double precision = 0.0;
  double fp_rate = 0.0;
  double f1 = 0.0;
  double auc = 0.0;
  double accuracy = 0.0;
  bool degenerate = false;
};

// Thresholds fall-class scores at `threshold` (score >= threshold predicts
// fall) and derives the Table-style metric suite. AUC is filled via roc_auc
// when both classes are present.
MetricsReport compute_metrics(const std::vector<double>& scores,
                              const std::vector<int>& labels,
                              double threshold = 0.5);

// Area under the ROC curve by the rank statistic
// AUC = (R+ - n+(n+ + 1)/2) / (n+ n-), ties contributing half via average
// ranks. Throws DataError when only one class is present.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

}  // namespace sdfa
