#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mlsq/boosting.hpp"
#include "mlsq/features.hpp"
#include "mlsq/forest.hpp"
#include "mlsq/matrix.hpp"
#include "mlsq/metrics.hpp"

namespace mlsq {

/// Raw feature rows with labels and their spatial fold/cell assignment.
struct LabeledSamples {
  Matrix X;
  std::vector<std::uint8_t> y;
  std::vector<int> fold;
  std::vector<std::int64_t> cell;
  std::vector<std::string> feature_names;
};

struct CvParams {
  ForestParams rf;
  GbtParams gbt;
  double threshold = 0.5;
  // Share of the training cells held back for boosting's early stopping.
  double validation_fraction = 0.1;
  std::size_t top_k = 20;
  std::uint64_t seed = 0;
};

struct ModelReport {
  std::vector<MetricSet> fold_metrics;
  std::array<MeanCi, kMetricCount> aggregate{};
  std::vector<double> importance;    // mean of the per-fold vectors
  std::vector<std::size_t> ranking;  // feature indices, most important first
  std::vector<double> scores;        // out-of-fold probability per sample
};

struct FoldSummary {
  int fold = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::size_t n_validation = 0;  // carved out of n_train for boosting only
  std::size_t validation_cells = 0;
  double test_prevalence = 0.0;
  int gbt_best_iteration = -1;
  std::size_t gbt_rounds = 0;
};

struct CvReport {
  int n_folds = 0;
  double prevalence = 0.0;
  std::vector<FoldSummary> folds;
  ModelReport forest;
  ModelReport boosting;
  // Pearson r between the two mean importance vectors, over every feature
  // and over the top_k features ranked by the average of both vectors.
  // NaN when undefined.
  double correlation_all = 0.0;
  double correlation_top = 0.0;
  std::vector<std::size_t> top_features;
};

/// Called once per fold with the fitted models, e.g. to persist them.
using FoldModelSink =
    std::function<void(int fold, const Standardizer&, const ForestModel&, const GbtModel&)>;

/// Each fold in turn is the test set. The standardizer is fitted on the other
/// folds, the forest is trained on them, and boosting trains on them minus
/// a seeded holdout of whole cells used for early stopping.
/// Throws Degenerate naming the first fold that lacks a class.
CvReport run_cv(const LabeledSamples& samples, const CvParams& params, const FoldModelSink& sink = {});

/// Feature indices sorted by descending value, ties by index.
std::vector<std::size_t> rank_descending(const std::vector<double>& values);

}  // namespace mlsq
