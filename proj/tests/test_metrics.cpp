#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>

#include "metric_oracle.hpp"
#include "mlsq/cross_validation.hpp"
#include "mlsq/error.hpp"
#include "mlsq/metrics.hpp"

using namespace mlsq;

namespace {

using Labels = std::vector<std::uint8_t>;
using Scores = std::vector<double>;

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(RocAuc, WorkedExamples) {
  EXPECT_EQ(roc_auc(Scores{0.1, 0.2, 0.8, 0.9}, Labels{0, 0, 1, 1}), 1.0);
  EXPECT_EQ(roc_auc(Scores{0.1, 0.4, 0.35, 0.8}, Labels{0, 0, 1, 1}), 0.75);
  EXPECT_EQ(roc_auc(Scores{0.5, 0.5, 0.5, 0.5}, Labels{0, 1, 0, 1}), 0.5);
  EXPECT_EQ(roc_auc(Scores{0.9, 0.8, 0.2, 0.1}, Labels{0, 0, 1, 1}), 0.0);
}

TEST(RocAuc, SingleClassIsUndefined) {
  EXPECT_NE(error_of([] { roc_auc(Scores{0.1, 0.2}, Labels{1, 1}); }).find("undefined AUC"), std::string::npos);
  EXPECT_THROW(roc_auc(Scores{0.1, 0.2}, Labels{0, 0}), Error);
  EXPECT_THROW(roc_auc(Scores{0.1}, Labels{0, 1}), Error);
}

TEST(RocAuc, MatchesPairCounting) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng() % 150;
    Scores s(n);
    Labels y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng() % 20) / 20.0;  // plenty of ties
      y[i] = rng() % 2;
    }
    y[0] = 0;
    y[1] = 1;
    EXPECT_NEAR(roc_auc(s, y), oracle::pair_auc(s, y), 1e-12);
  }
}

TEST(AveragePrecision, WorkedExample) {
  EXPECT_NEAR(average_precision(Scores{0.9, 0.5, 0.4}, Labels{1, 0, 1}), 5.0 / 6.0, 1e-15);
  EXPECT_EQ(average_precision(Scores{0.9, 0.8, 0.1}, Labels{1, 1, 0}), 1.0);
}

TEST(AveragePrecision, TiesShareAThreshold) {
  // One threshold covering everything: precision = prevalence.
  EXPECT_NEAR(average_precision(Scores{0.3, 0.3, 0.3, 0.3}, Labels{1, 0, 0, 0}), 0.25, 1e-15);
}

TEST(AveragePrecision, NoPositivesIsUndefined) {
  EXPECT_THROW(average_precision(Scores{0.1, 0.2}, Labels{0, 0}), Error);
}

TEST(AveragePrecision, MatchesThresholdSweep) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 150;
    Scores s(n);
    Labels y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = trial % 2 ? static_cast<double>(rng() % 10) : std::ldexp(static_cast<double>(rng() >> 11), -53);
      y[i] = rng() % 3 == 0;
    }
    y[0] = 1;
    EXPECT_NEAR(average_precision(s, y), oracle::sweep_ap(s, y), 1e-12);
  }
}

TEST(Prf, WorkedExample) {
  // TP = 2, FP = 2, FN = 1
  const auto r = prf_at_threshold(Scores{0.9, 0.8, 0.7, 0.6, 0.1, 0.0}, Labels{1, 1, 0, 0, 1, 0});
  EXPECT_EQ(r.precision, 0.5);
  EXPECT_NEAR(r.recall, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(r.f1, 4.0 / 7.0, 1e-15);
}

TEST(Prf, ThresholdIsInclusive) {
  const auto r = prf_at_threshold(Scores{0.5, 0.4999}, Labels{1, 1}, 0.5);
  EXPECT_EQ(r.recall, 0.5);
  EXPECT_EQ(r.precision, 1.0);
}

TEST(Prf, EmptyPredictionsGiveZeros) {
  const auto r = prf_at_threshold(Scores{0.1, 0.2}, Labels{1, 0}, 0.9);
  EXPECT_EQ(r.precision, 0.0);
  EXPECT_EQ(r.recall, 0.0);
  EXPECT_EQ(r.f1, 0.0);
}

TEST(Evaluate, OrderFollowsTheNames) {
  const Scores s{0.9, 0.8, 0.7, 0.6, 0.1, 0.0};
  const Labels y{1, 1, 0, 0, 1, 0};
  const auto m = evaluate(s, y);
  EXPECT_EQ(m[0], roc_auc(s, y));
  EXPECT_EQ(m[1], average_precision(s, y));
  EXPECT_EQ(m[2], 0.5);
  EXPECT_EQ(kMetricNames[4], "f1");
}

TEST(MeanCi, FoldValues) {
  const Scores v{0.8576, 0.8719, 0.8818, 0.8775, 0.8835};
  const auto ci = mean_ci(v);
  EXPECT_NEAR(ci.mean, 0.87446, 1e-12);
  double ss = 0;
  for (double x : v) ss += (x - ci.mean) * (x - ci.mean);
  EXPECT_NEAR(ci.half_width, 2.7764451051977987 * std::sqrt(ss / 4.0) / std::sqrt(5.0), 1e-12);
}

TEST(MeanCi, IdenticalValuesHaveZeroWidth) {
  const auto ci = mean_ci(Scores{0.7, 0.7, 0.7});
  EXPECT_NEAR(ci.mean, 0.7, 1e-15);
  EXPECT_NEAR(ci.half_width, 0.0, 1e-15);
  EXPECT_THROW(mean_ci(Scores{0.7}), Error);
}

TEST(MeanCi, TwoValuesUseTheWideQuantile) {
  const auto ci = mean_ci(Scores{0.0, 1.0});
  EXPECT_NEAR(ci.half_width, 12.706204736174698 * std::sqrt(0.5) / std::sqrt(2.0), 1e-9);
}

TEST(Correlation, KnownValues) {
  EXPECT_NEAR(importance_correlation(Scores{1, 2, 3}, Scores{2, 4, 6}), 1.0, 1e-15);
  EXPECT_NEAR(importance_correlation(Scores{1, 2, 3}, Scores{3, 2, 1}), -1.0, 1e-15);
  EXPECT_NEAR(importance_correlation(Scores{1, 0, 0, 1}, Scores{1, 1, 0, 0}), 0.0, 1e-15);
  EXPECT_NE(error_of([] { importance_correlation(Scores{1, 1, 1}, Scores{1, 2, 3}); }).find("undefined correlation"),
            std::string::npos);
  EXPECT_THROW(importance_correlation(Scores{1, 2}, Scores{1, 2, 3}), Error);
}

TEST(Ranking, DescendingWithIndexTies) {
  EXPECT_EQ(rank_descending({0.1, 0.5, 0.1, 0.3}), (std::vector<std::size_t>{1, 3, 0, 2}));
}

namespace {

// 40 cells in 4 folds; label driven by feature 0, feature 2 is noise.
LabeledSamples cv_samples(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  LabeledSamples s;
  s.feature_names = {"signal", "weak", "noise"};
  for (int cell = 0; cell < 40; ++cell) {
    for (int k = 0; k < 25; ++k) {
      const std::array<double, 3> row{g(rng) + 10.0, g(rng), g(rng) * 100.0};
      s.X.append_row(row);
      s.y.push_back(u(rng) < sigmoid(3.0 * (row[0] - 10.0) + 0.5 * row[1]) ? 1 : 0);
      s.cell.push_back(cell * 7);
      s.fold.push_back(cell % 4);
    }
  }
  return s;
}

CvParams cv_quick() {
  CvParams p;
  p.rf.n_estimators = 10;
  p.gbt.num_boost_round = 60;
  p.gbt.eta = 0.2;
  p.gbt.max_depth = 3;
  p.seed = 3;
  p.rf.seed = 4;
  p.gbt.seed = 5;
  p.top_k = 2;
  return p;
}

}  // namespace

TEST(CrossValidation, ReportsEveryFoldAndOutOfFoldScores) {
  const auto samples = cv_samples(10);
  std::map<int, std::vector<double>> means;
  std::vector<std::pair<ForestModel, Standardizer>> rf_models;
  const auto report = run_cv(samples, cv_quick(), [&](int f, const Standardizer& s, const ForestModel& rf,
                                                      const GbtModel&) {
    means[f] = s.mean();
    rf_models.emplace_back(rf, s);
  });
  EXPECT_EQ(report.n_folds, 4);
  ASSERT_EQ(report.folds.size(), 4u);
  ASSERT_EQ(report.forest.fold_metrics.size(), 4u);
  EXPECT_GT(report.forest.aggregate[0].mean, 0.85);
  EXPECT_GT(report.boosting.aggregate[0].mean, 0.85);
  EXPECT_EQ(report.forest.ranking[0], 0u);
  EXPECT_EQ(report.boosting.ranking[0], 0u);
  EXPECT_EQ(report.top_features.size(), 2u);

  for (int f = 0; f < 4; ++f) {
    const auto& fs = report.folds[static_cast<std::size_t>(f)];
    EXPECT_EQ(fs.n_test, 250u);
    EXPECT_EQ(fs.n_train, 750u);
    EXPECT_EQ(fs.validation_cells, 3u);  // round(0.1 * 30)
    EXPECT_EQ(fs.n_validation, 75u);
    // Standardizer statistics come from the training folds alone.
    double m = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < samples.y.size(); ++i) {
      if (samples.fold[i] != f) {
        m += samples.X(i, 2);
        ++count;
      }
    }
    EXPECT_NEAR(means[f][2], m / static_cast<double>(count), 1e-9);
  }
  // Out-of-fold scores come from the model that did not see the row.
  for (std::size_t i = 0; i < samples.y.size(); i += 13) {
    const auto& [rf, s] = rf_models[static_cast<std::size_t>(samples.fold[i])];
    Matrix row(1, 3);
    for (std::size_t c = 0; c < 3; ++c) row(0, c) = samples.X(i, c);
    EXPECT_EQ(report.forest.scores[i], predict_proba(rf, s.apply(row))[0]);
  }
}

TEST(CrossValidation, AggregatesAreMeanCiOfFolds) {
  const auto report = run_cv(cv_samples(11), cv_quick());
  for (std::size_t m = 0; m < kMetricCount; ++m) {
    Scores v;
    for (const auto& fm : report.boosting.fold_metrics) v.push_back(fm[m]);
    const auto ci = mean_ci(v);
    EXPECT_EQ(report.boosting.aggregate[m].mean, ci.mean);
    EXPECT_EQ(report.boosting.aggregate[m].half_width, ci.half_width);
  }
  EXPECT_EQ(report.correlation_all,
            importance_correlation(report.forest.importance, report.boosting.importance));
}

TEST(CrossValidation, IsDeterministic) {
  const auto samples = cv_samples(12);
  const auto a = run_cv(samples, cv_quick());
  const auto b = run_cv(samples, cv_quick());
  EXPECT_EQ(a.forest.scores, b.forest.scores);
  EXPECT_EQ(a.boosting.scores, b.boosting.scores);
}

TEST(CrossValidation, FoldWithoutBothClassesIsNamed) {
  auto samples = cv_samples(13);
  for (std::size_t i = 0; i < samples.y.size(); ++i) {
    if (samples.fold[i] == 2) samples.y[i] = 1;
  }
  try {
    run_cv(samples, cv_quick());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Degenerate);
    EXPECT_NE(std::string(e.what()).find("fold 2"), std::string::npos);
  }
}

TEST(CrossValidation, PermutedLabelsScoreAtChance) {
  auto samples = cv_samples(14);
  std::mt19937_64 rng(15);
  std::shuffle(samples.y.begin(), samples.y.end(), rng);
  const auto report = run_cv(samples, cv_quick());
  EXPECT_NEAR(report.forest.aggregate[0].mean, 0.5, 0.08);
  EXPECT_NEAR(report.boosting.aggregate[0].mean, 0.5, 0.08);
}
