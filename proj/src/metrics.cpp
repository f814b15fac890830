#include "ldd/metrics.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "ldd/errors.hpp"

namespace ldd::metrics {

namespace {

void check_inputs(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ValidationError("scores and labels differ in length");
  std::size_t pos = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw ValidationError("labels must be 0 or 1");
    pos += l;
  }
  if (pos == 0 || pos == labels.size()) throw ValidationError("AUC is undefined for single-class labels");
}

std::vector<std::size_t> order_descending(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

}  // namespace

double auc(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Twice the midrank is an integer, so the rank sum stays exact.
  long double rank_sum2 = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const long double midrank2 = static_cast<long double>(i + 1 + j + 1);
    for (std::size_t k = i; k <= j; ++k)
      if (labels[order[k]] == 1) rank_sum2 += midrank2;
    i = j + 1;
  }
  const long double n1 = std::count(labels.begin(), labels.end(), 1);
  const long double n0 = static_cast<long double>(labels.size()) - n1;
  const long double u = rank_sum2 / 2 - n1 * (n1 + 1) / 2;
  return static_cast<double>(u / (n1 * n0));
}

std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels);
  const double n1 = std::count(labels.begin(), labels.end(), 1);
  const double n0 = static_cast<double>(labels.size()) - n1;
  const auto order = order_descending(scores);
  std::vector<RocPoint> roc{{0.0, 0.0, std::numeric_limits<double>::infinity()}};
  double tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double threshold = scores[order[i]];
    while (i < order.size() && scores[order[i]] == threshold) {
      (labels[order[i]] == 1 ? tp : fp) += 1;
      ++i;
    }
    roc.push_back({fp / n0, tp / n1, threshold});
  }
  return roc;
}

double accuracy(std::span<const double> scores, std::span<const int> labels, double threshold) {
  if (scores.size() != labels.size() || scores.empty()) throw ValidationError("accuracy needs matching nonempty inputs");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) correct += (scores[i] > threshold ? 1 : 0) == labels[i];
  return static_cast<double>(correct) / scores.size();
}

double best_threshold_accuracy(std::span<const double> scores, std::span<const int> labels) {
  const double n1 = std::count(labels.begin(), labels.end(), 1);
  const double n0 = static_cast<double>(labels.size()) - n1;
  double best = 0.0;
  for (const auto& p : roc_curve(scores, labels))
    best = std::max(best, (p.tpr * n1 + (1.0 - p.fpr) * n0) / (n0 + n1));
  return best;
}

}  // namespace ldd::metrics
