#include "mlsq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <boost/math/distributions/students_t.hpp>

#include "mlsq/error.hpp"

namespace mlsq {
namespace {

void check_inputs(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) {
    invalid_input("scores and labels differ in length (" + std::to_string(scores.size()) + " vs " +
                  std::to_string(labels.size()) + ")");
  }
  for (std::uint8_t y : labels) {
    if (y > 1) invalid_input("labels must be 0 or 1");
  }
}

std::vector<std::size_t> order_by_score_desc(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

}  // namespace

double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  check_inputs(scores, labels);
  const auto n_pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  const auto n_neg = static_cast<double>(labels.size()) - n_pos;
  if (n_pos == 0.0 || n_neg == 0.0) degenerate("undefined AUC: both classes are required");

  // Walk score groups from the top; each negative in a group beats every
  // positive seen in earlier groups and ties with the group's positives.
  const auto order = order_by_score_desc(scores);
  double pos_above = 0.0;
  double correct = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    double pos = 0.0, neg = 0.0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] ? pos : neg) += 1.0;
      ++j;
    }
    correct += neg * (pos_above + 0.5 * pos);
    pos_above += pos;
    i = j;
  }
  return correct / (n_pos * n_neg);
}

double average_precision(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  check_inputs(scores, labels);
  const auto n_pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  if (n_pos == 0.0) degenerate("average precision is undefined without positives");

  const auto order = order_by_score_desc(scores);
  double tp = 0.0, predicted = 0.0, prev_recall = 0.0, ap = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      tp += labels[order[j]];
      predicted += 1.0;
      ++j;
    }
    const double recall = tp / n_pos;
    ap += (recall - prev_recall) * (tp / predicted);
    prev_recall = recall;
    i = j;
  }
  return ap;
}

Prf prf_at_threshold(std::span<const double> scores, std::span<const std::uint8_t> labels, double threshold) {
  check_inputs(scores, labels);
  double tp = 0.0, fp = 0.0, fn = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    if (predicted && labels[i]) tp += 1.0;
    if (predicted && !labels[i]) fp += 1.0;
    if (!predicted && labels[i]) fn += 1.0;
  }
  Prf out;
  out.precision = tp + fp > 0.0 ? tp / (tp + fp) : 0.0;
  out.recall = tp + fn > 0.0 ? tp / (tp + fn) : 0.0;
  const double sum = out.precision + out.recall;
  out.f1 = sum > 0.0 ? 2.0 * out.precision * out.recall / sum : 0.0;
  return out;
}

MeanCi mean_ci(std::span<const double> values) {
  if (values.size() < 2) invalid_input("mean_ci needs at least 2 values");
  const auto n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double s = std::sqrt(ss / (n - 1.0));
  const boost::math::students_t dist(n - 1.0);
  const double t = boost::math::quantile(dist, 0.975);
  return {mean, t * s / std::sqrt(n)};
}

double importance_correlation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) invalid_input("importance vectors differ in length");
  if (a.size() < 2) degenerate("undefined correlation: fewer than 2 entries");
  const auto n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) degenerate("undefined correlation: constant importance vector");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

MetricSet evaluate(std::span<const double> scores, std::span<const std::uint8_t> labels, double threshold) {
  const Prf prf = prf_at_threshold(scores, labels, threshold);
  return {roc_auc(scores, labels), average_precision(scores, labels), prf.precision, prf.recall, prf.f1};
}

}  // namespace mlsq
