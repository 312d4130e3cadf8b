#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mlsq/decision_tree.hpp"
#include "mlsq/matrix.hpp"

namespace mlsq {

/// Random-forest hyperparameters. Defaults follow the reference setup:
/// 100 trees, depth 20, half of the rows per tree drawn without replacement,
/// balanced class weights, single-threaded.
struct ForestParams {
  int n_estimators = 100;
  int max_depth = 20;  // <= 0 means unlimited
  double max_samples = 0.5;
  bool balanced_class_weight = true;
  int min_samples_leaf = 1;
  unsigned n_jobs = 1;  // 0 = all hardware threads
  std::uint64_t seed = 0;
  // Training sets larger than this are subsampled once, before any tree is
  // grown, to `subsample_fraction` of their rows.
  std::size_t subsample_threshold = 1'000'000;
  double subsample_fraction = 0.3;
};

struct ForestModel {
  ForestParams params;
  std::vector<DecisionTree> trees;
  std::vector<double> feature_importance;  // mean decrease in Gini impurity, sums to 1
  std::size_t n_features = 0;
  std::size_t n_rows = 0;  // rows actually used, after any pre-subsampling
  std::array<std::size_t, 2> class_counts{};
};

/// Greedy Gini trees over every feature with midpoint thresholds.
/// Throws Degenerate "degenerate labels" unless both classes are present.
ForestModel fit_forest(const Matrix& X, std::span<const std::uint8_t> y, const ForestParams& params);

/// Mean leaf probability of class 1 over all trees.
std::vector<double> predict_proba(const ForestModel& model, const Matrix& X);

}  // namespace mlsq
