#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mlsq/decision_tree.hpp"
#include "mlsq/matrix.hpp"

namespace mlsq {

/// Gradient-boosted trees with a logistic objective and histogram splits.
struct GbtParams {
  int max_depth = 8;
  double eta = 0.05;
  double subsample = 0.8;
  double colsample_bytree = 0.8;
  int num_boost_round = 1000;
  int early_stopping_rounds = 50;
  int n_bins = 256;
  double lambda = 1.0;            // L2 penalty on leaf weights
  double min_child_weight = 1.0;  // minimum hessian sum per child
  // Unset means n_negative / n_positive of the training rows.
  std::optional<double> scale_pos_weight;
  unsigned n_jobs = 1;
  std::uint64_t seed = 0;
};

struct GbtModel {
  GbtParams params;
  double scale_pos_weight = 1.0;
  std::vector<DecisionTree> trees;  // leaf values are raw weights, scaled by eta at prediction
  int best_iteration = -1;          // 0-based round with the lowest validation logloss
  std::vector<double> feature_importance;  // total split gain, sums to 1
  std::vector<double> validation_logloss;  // after each round
  std::vector<double> training_objective;  // weighted training logloss after each round
  std::size_t n_features = 0;

  /// Trees used by default at prediction time.
  std::size_t best_tree_count() const noexcept {
    return best_iteration < 0 ? 0 : static_cast<std::size_t>(best_iteration) + 1;
  }
};

/// Per-feature split candidates. A value x falls in bin b = #{cuts < x}, so
/// "bin <= b" is the same test as "x <= cuts[b]".
struct HistogramCuts {
  std::vector<std::vector<double>> cuts;  // strictly increasing per feature

  std::size_t bin_count(std::size_t feature) const { return cuts[feature].size() + 1; }
  std::uint16_t bin_of(std::size_t feature, double value) const;
};

/// Quantile cuts from the training rows, at most n_bins bins per feature.
/// With no more distinct values than bins, every distinct value has its own
/// bin and cuts sit at midpoints between neighbors.
HistogramCuts build_cuts(const Matrix& X, int n_bins);

/// Fits until num_boost_round or until validation logloss has not improved
/// for early_stopping_rounds rounds. Throws Degenerate on single-class
/// training labels and InvalidInput on an empty validation set.
GbtModel fit_gbt(const Matrix& X_train, std::span<const std::uint8_t> y_train, const Matrix& X_val,
                 std::span<const std::uint8_t> y_val, const GbtParams& params);

/// sigmoid(sum over the first `tree_count` trees of eta * leaf). Without a
/// count the best-iteration prefix is used.
std::vector<double> predict_proba(const GbtModel& model, const Matrix& X,
                                  std::optional<std::size_t> tree_count = std::nullopt);

/// Mean binary cross-entropy with p clamped to [1e-15, 1 - 1e-15].
double logloss(std::span<const std::uint8_t> y, std::span<const double> p);

struct GradientPair {
  double grad = 0.0;
  double hess = 0.0;
};

/// First and second derivative of weight * logloss(y, sigmoid(margin)) with
/// respect to the margin.
GradientPair logistic_gradient(std::uint8_t y, double margin, double weight);

inline double sigmoid(double margin) noexcept { return 1.0 / (1.0 + std::exp(-margin)); }

}  // namespace mlsq
