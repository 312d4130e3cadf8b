#include "mlsq/cross_validation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <string>

#include "mlsq/error.hpp"
#include "mlsq/log.hpp"
#include "mlsq/random.hpp"

namespace mlsq {
namespace {

constexpr std::uint64_t kHoldoutSalt = 0x686f6c64ULL;

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

void check_samples(const LabeledSamples& s) {
  const std::size_t n = s.X.rows();
  if (n == 0) invalid_input("no samples");
  if (s.y.size() != n || s.fold.size() != n || s.cell.size() != n) {
    invalid_input("sample columns differ in length");
  }
  if (!s.feature_names.empty() && s.feature_names.size() != s.X.cols()) {
    invalid_input("feature_names length does not match the feature matrix");
  }
  for (std::uint8_t v : s.y) {
    if (v > 1) invalid_input("labels must be 0 or 1");
  }
}

double safe_correlation(std::span<const double> a, std::span<const double> b) {
  try {
    return importance_correlation(a, b);
  } catch (const Error& e) {
    log_warning(e.what());
    return std::numeric_limits<double>::quiet_NaN();
  }
}

void finish_model_report(ModelReport& report, const std::vector<std::vector<double>>& per_fold) {
  const std::size_t d = per_fold.front().size();
  report.importance.assign(d, 0.0);
  for (const auto& imp : per_fold) {
    for (std::size_t f = 0; f < d; ++f) report.importance[f] += imp[f] / static_cast<double>(per_fold.size());
  }
  report.ranking = rank_descending(report.importance);
  for (std::size_t m = 0; m < kMetricCount; ++m) {
    std::vector<double> values;
    for (const MetricSet& fm : report.fold_metrics) values.push_back(fm[m]);
    report.aggregate[m] = mean_ci(values);
  }
}

}  // namespace

std::vector<std::size_t> rank_descending(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  return order;
}

CvReport run_cv(const LabeledSamples& samples, const CvParams& params, const FoldModelSink& sink) {
  check_samples(samples);
  const std::size_t n = samples.X.rows();
  const int n_folds = *std::max_element(samples.fold.begin(), samples.fold.end()) + 1;
  if (*std::min_element(samples.fold.begin(), samples.fold.end()) < 0) invalid_input("negative fold id");
  if (n_folds < 2) invalid_input("cross-validation needs at least 2 folds");
  if (!(params.validation_fraction > 0.0 && params.validation_fraction < 1.0)) {
    invalid_input("validation_fraction must be in (0, 1)");
  }

  std::vector<Split> splits(static_cast<std::size_t>(n_folds));
  for (std::size_t i = 0; i < n; ++i) {
    for (int f = 0; f < n_folds; ++f) {
      auto& s = splits[static_cast<std::size_t>(f)];
      (samples.fold[i] == f ? s.test : s.train).push_back(i);
    }
  }
  for (int f = 0; f < n_folds; ++f) {
    std::array<std::size_t, 2> counts{};
    for (std::size_t i : splits[static_cast<std::size_t>(f)].test) ++counts[samples.y[i]];
    if (counts[0] == 0 || counts[1] == 0) {
      degenerate("fold " + std::to_string(f) + " does not contain both classes (" + std::to_string(counts[1]) +
                 " qualified, " + std::to_string(counts[0]) + " unqualified)");
    }
  }

  CvReport report;
  report.n_folds = n_folds;
  report.prevalence =
      static_cast<double>(std::count(samples.y.begin(), samples.y.end(), 1)) / static_cast<double>(n);
  report.forest.scores.assign(n, 0.0);
  report.boosting.scores.assign(n, 0.0);
  std::vector<std::vector<double>> rf_importance, gbt_importance;

  for (int f = 0; f < n_folds; ++f) {
    const Split& split = splits[static_cast<std::size_t>(f)];
    FoldSummary summary;
    summary.fold = f;
    summary.n_train = split.train.size();
    summary.n_test = split.test.size();

    const Matrix X_train_raw = samples.X.select_rows(split.train);
    const Standardizer standardizer = Standardizer::fit(X_train_raw);
    const Matrix X_train = standardizer.apply(X_train_raw);
    const Matrix X_test = standardizer.apply(samples.X.select_rows(split.test));
    const auto y_train = select(samples.y, split.train);
    const auto y_test = select(samples.y, split.test);

    // Early-stopping holdout: whole training cells, chosen by seed.
    std::vector<std::int64_t> cells;
    {
      std::set<std::int64_t> distinct;
      for (std::size_t i : split.train) distinct.insert(samples.cell[i]);
      cells.assign(distinct.begin(), distinct.end());
    }
    Rng rng(derive_seed(params.seed, kHoldoutSalt + static_cast<std::uint64_t>(f)));
    std::vector<std::size_t> fit_rows, val_rows;
    if (cells.size() >= 2) {
      shuffle(cells, rng);
      const auto n_val = std::clamp<std::size_t>(
          static_cast<std::size_t>(std::llround(params.validation_fraction * static_cast<double>(cells.size()))), 1,
          cells.size() - 1);
      const std::set<std::int64_t> held(cells.begin(), cells.begin() + static_cast<std::ptrdiff_t>(n_val));
      for (std::size_t r = 0; r < split.train.size(); ++r) {
        (held.count(samples.cell[split.train[r]]) ? val_rows : fit_rows).push_back(r);
      }
      summary.validation_cells = n_val;
    } else {
      log_warning("fold " + std::to_string(f) + ": single training cell, early-stopping holdout drawn by row");
      for (std::size_t r = 0; r < split.train.size(); ++r) {
        (uniform01(rng) < params.validation_fraction ? val_rows : fit_rows).push_back(r);
      }
    }
    if (val_rows.empty() || fit_rows.empty()) degenerate("fold " + std::to_string(f) + ": empty early-stopping split");
    summary.n_validation = val_rows.size();

    log_info("fold " + std::to_string(f) + ": " + std::to_string(split.train.size()) + " train, " +
             std::to_string(split.test.size()) + " test rows");
    const ForestModel rf = fit_forest(X_train, y_train, params.rf);
    const GbtModel gbt = fit_gbt(X_train.select_rows(fit_rows), select(y_train, fit_rows),
                                 X_train.select_rows(val_rows), select(y_train, val_rows), params.gbt);
    summary.gbt_best_iteration = gbt.best_iteration;
    summary.gbt_rounds = gbt.trees.size();

    const auto rf_scores = predict_proba(rf, X_test);
    const auto gbt_scores = predict_proba(gbt, X_test);
    for (std::size_t i = 0; i < split.test.size(); ++i) {
      report.forest.scores[split.test[i]] = rf_scores[i];
      report.boosting.scores[split.test[i]] = gbt_scores[i];
    }
    report.forest.fold_metrics.push_back(evaluate(rf_scores, y_test, params.threshold));
    report.boosting.fold_metrics.push_back(evaluate(gbt_scores, y_test, params.threshold));
    summary.test_prevalence =
        static_cast<double>(std::count(y_test.begin(), y_test.end(), 1)) / static_cast<double>(y_test.size());
    rf_importance.push_back(rf.feature_importance);
    gbt_importance.push_back(gbt.feature_importance);
    log_info("fold " + std::to_string(f) + ": RF AUC " + std::to_string(report.forest.fold_metrics.back()[0]) +
             ", GBT AUC " + std::to_string(report.boosting.fold_metrics.back()[0]) + " (best iteration " +
             std::to_string(gbt.best_iteration) + ")");

    if (sink) sink(f, standardizer, rf, gbt);
    report.folds.push_back(summary);
  }

  finish_model_report(report.forest, rf_importance);
  finish_model_report(report.boosting, gbt_importance);

  const std::size_t d = samples.X.cols();
  std::vector<double> combined(d);
  for (std::size_t k = 0; k < d; ++k) combined[k] = 0.5 * (report.forest.importance[k] + report.boosting.importance[k]);
  const auto order = rank_descending(combined);
  report.top_features.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(std::min(params.top_k, d)));
  report.correlation_all = safe_correlation(report.forest.importance, report.boosting.importance);
  std::vector<double> top_rf, top_gbt;
  for (std::size_t k : report.top_features) {
    top_rf.push_back(report.forest.importance[k]);
    top_gbt.push_back(report.boosting.importance[k]);
  }
  report.correlation_top = safe_correlation(top_rf, top_gbt);
  return report;
}

}  // namespace mlsq
