#pragma once

#include <span>
#include <vector>

namespace ldd::metrics {

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;  // scores >= threshold are called fake
};

/// P(score_fake > score_real) + ½ P(tie), computed exactly from midranks.
/// Labels are 0 (real) or 1 (fake); throws ValidationError when a class is
/// missing or sizes differ.
double auc(std::span<const double> scores, std::span<const int> labels);

/// Points for every distinct threshold, from (0,0) to (1,1).
std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels);

/// Fraction of samples with (score > threshold) == label.
double accuracy(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5);

/// Highest accuracy over all ROC thresholds.
double best_threshold_accuracy(std::span<const double> scores, std::span<const int> labels);

}  // namespace ldd::metrics
