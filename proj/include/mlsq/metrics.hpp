#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace mlsq {

// Class 1 ("qualified") is the positive class throughout.

/// Probability that a random positive outscores a random negative, with
/// tied pairs counted as one half. Throws "undefined AUC" unless both
/// classes are present.
double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// Step-wise AP: sum over distinct descending score thresholds of
/// (R_n - R_{n-1}) * P_n. Tied scores share one threshold. Throws when
/// there are no positives.
double average_precision(std::span<const double> scores, std::span<const std::uint8_t> labels);

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// A row is predicted positive when score >= threshold. Precision is 0 when
/// nothing is predicted positive, recall is 0 without positives, and F1 is 0
/// when precision + recall is 0.
Prf prf_at_threshold(std::span<const double> scores, std::span<const std::uint8_t> labels,
                     double threshold = 0.5);

struct MeanCi {
  double mean = 0.0;
  double half_width = 0.0;
};

/// Arithmetic mean and the half-width t(0.975, n-1) * s / sqrt(n) of the
/// two-sided 95% Student-t interval, s being the sample standard deviation.
MeanCi mean_ci(std::span<const double> values);

/// Pearson correlation. Throws "undefined correlation" if either vector is
/// constant, or on a length mismatch.
double importance_correlation(std::span<const double> a, std::span<const double> b);

inline constexpr std::size_t kMetricCount = 5;
inline constexpr std::array<std::string_view, kMetricCount> kMetricNames = {
    "roc_auc", "ap", "precision", "recall", "f1"};

/// The five reported metrics, in kMetricNames order. Precision, recall and
/// F1 are taken at the decision threshold passed to evaluate().
using MetricSet = std::array<double, kMetricCount>;

MetricSet evaluate(std::span<const double> scores, std::span<const std::uint8_t> labels,
                   double threshold = 0.5);

}  // namespace mlsq
