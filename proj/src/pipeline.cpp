#include "mlsq/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include "mlsq/cloud_io.hpp"
#include "mlsq/error.hpp"
#include "mlsq/grid.hpp"
#include "mlsq/labeling.hpp"
#include "mlsq/log.hpp"
#include "mlsq/model_io.hpp"

namespace mlsq {
namespace {

std::vector<std::string> canonical_feature_names() {
  return {kFeatureNames.begin(), kFeatureNames.end()};
}

std::string utc_timestamp(bool fixed_clock) {
  if (fixed_clock) return "1970-01-01T00:00:00Z";
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) io_error("cannot create directory " + dir.string());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) io_error("cannot write " + path.string());
  out << text;
  if (!out) io_error("write failed for " + path.string());
}

Json model_json(const ModelReport& m, const std::size_t top_k) {
  const auto names = canonical_feature_names();
  Json folds, aggregate, importance;
  for (std::size_t k = 0; k < kMetricCount; ++k) {
    std::vector<double> values;
    for (const MetricSet& fm : m.fold_metrics) values.push_back(fm[k]);
    const std::string key(kMetricNames[k]);
    folds[key] = values;
    aggregate[key] = Json{{"mean", m.aggregate[k].mean}, {"ci95_half_width", m.aggregate[k].half_width}};
  }
  for (std::size_t f = 0; f < m.importance.size(); ++f) importance[names[f]] = m.importance[f];
  Json top = Json::array();
  for (std::size_t i = 0; i < std::min(top_k, m.ranking.size()); ++i) top.push_back(names[m.ranking[i]]);
  return Json{{"fold_metrics", folds}, {"aggregate", aggregate}, {"importance", importance}, {"top", top}};
}

}  // namespace

FeatureTable label_scan(const PointCloud& mls, const PointCloud& reference, const RunConfig& config,
                        LabelSummary* summary) {
  if (mls.empty()) invalid_input("empty scan cloud");
  if (reference.empty()) invalid_input("empty reference cloud");
  if (!(config.threshold < config.cutoff)) invalid_input("threshold must be below cutoff");
  const SpatialIndex ref_index = build_index(reference, config.features.leaf_size);
  const auto distances = c2c_distances(mls, ref_index, config.feature_jobs);
  const auto retained = apply_cutoff(distances, config.cutoff);
  const auto labels = label(distances, config.threshold, config.cutoff);

  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < mls.size(); ++i) {
    if (retained[i]) kept.push_back(i);
  }
  if (kept.empty()) degenerate("no scan point lies within the cutoff distance");
  const PointCloud kept_cloud = subset(mls, kept);
  const GridPartition grid = grid_partition(kept_cloud, config.cell_size);
  const FoldAssignment folds = assign_folds(grid, config.n_folds, derive_stage_seeds(config.seed).folds);
  const auto fold_of_point = folds.fold_of_points(grid);

  FeatureTable table;
  table.has_c2c = table.has_label = table.has_fold = table.has_cell = true;
  table.rows.reserve(kept.size());
  std::size_t qualified = 0;
  for (std::size_t k = 0; k < kept.size(); ++k) {
    FeatureRow row;
    row.point_index = static_cast<std::int64_t>(kept[k]);
    row.c2c = distances[kept[k]];
    row.label = labels[kept[k]];
    row.fold = fold_of_point[k];
    row.cell = grid.linear_cell_of_point(k);
    qualified += static_cast<std::size_t>(row.label);
    table.rows.push_back(row);
  }
  if (summary) *summary = {mls.size(), kept.size(), qualified, folds.fold_of_cell().size()};
  return table;
}

std::size_t add_features(FeatureTable& table, const PointCloud& mls, const RunConfig& config) {
  std::vector<std::size_t> indices;
  indices.reserve(table.rows.size());
  for (const FeatureRow& row : table.rows) {
    if (row.point_index < 0 || static_cast<std::size_t>(row.point_index) >= mls.size()) {
      invalid_input("table row references point " + std::to_string(row.point_index) + " but the scan has " +
                    std::to_string(mls.size()) + " points");
    }
    indices.push_back(static_cast<std::size_t>(row.point_index));
  }
  const FeatureExtractor extractor(mls, config.features);
  const auto batch = extractor.compute_all(indices, config.feature_jobs);

  std::vector<FeatureRow> rows;
  rows.reserve(batch.kept.size());
  for (std::size_t k = 0; k < batch.kept.size(); ++k) {
    FeatureRow row = table.rows[batch.kept[k]];
    row.features = batch.features[k].values;
    row.opt_n = batch.features[k].opt_n;
    rows.push_back(row);
  }
  table.rows = std::move(rows);
  table.has_features = true;
  if (!batch.dropped.empty()) {
    log_warning("dropped " + std::to_string(batch.dropped.size()) + " points with degenerate neighborhoods");
  }
  return batch.dropped.size();
}

LabeledSamples samples_from_table(const FeatureTable& table) {
  if (!table.has_features) invalid_input("feature table has no feature columns; run 'features' first");
  if (!table.has_label) invalid_input("feature table has no label column; run 'label' first");
  if (!table.has_fold) invalid_input("feature table has no fold column; run 'label' first");
  LabeledSamples s;
  s.feature_names = canonical_feature_names();
  s.X = Matrix(table.rows.size(), kFeatureCount);
  s.y.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const FeatureRow& row = table.rows[r];
    for (std::size_t f = 0; f < kFeatureCount; ++f) s.X(r, f) = row.features[f];
    if (row.label != 0 && row.label != 1) invalid_input("labels must be 0 or 1");
    s.y.push_back(static_cast<std::uint8_t>(row.label));
    s.fold.push_back(row.fold);
    s.cell.push_back(table.has_cell ? row.cell : static_cast<std::int64_t>(row.fold));
  }
  return s;
}

CvParams cv_params(const RunConfig& config) {
  const StageSeeds seeds = derive_stage_seeds(config.seed);
  CvParams p;
  p.rf = config.rf;
  p.rf.seed = seeds.forest;
  p.gbt = config.gbt;
  p.gbt.seed = seeds.boosting;
  p.threshold = config.decision_threshold;
  p.validation_fraction = config.validation_fraction;
  p.top_k = config.top_k;
  p.seed = seeds.holdout;
  return p;
}

Json make_report(const CvReport& cv, const RunConfig& config, const FeatureTable& table,
                 const std::string& table_name, bool fixed_clock) {
  const StageSeeds seeds = derive_stage_seeds(config.seed);
  const auto names = canonical_feature_names();
  std::size_t qualified = 0;
  for (const FeatureRow& row : table.rows) qualified += static_cast<std::size_t>(row.label == 1);

  Json folds = Json::array();
  for (const FoldSummary& f : cv.folds) {
    folds.push_back(Json{{"fold", f.fold},
                         {"n_train", f.n_train},
                         {"n_test", f.n_test},
                         {"n_validation", f.n_validation},
                         {"validation_cells", f.validation_cells},
                         {"test_prevalence", f.test_prevalence},
                         {"gbt_best_iteration", f.gbt_best_iteration},
                         {"gbt_rounds", f.gbt_rounds}});
  }
  Json top = Json::array();
  for (std::size_t k : cv.top_features) top.push_back(names[k]);

  Json doc;
  doc["tool"] = "mlsq";
  doc["format_version"] = 1;
  doc["generated_at"] = utc_timestamp(fixed_clock);
  doc["config"] = config_to_json(config);
  doc["seeds"] = Json{{"root", config.seed},
                      {"folds", seeds.folds},
                      {"forest", seeds.forest},
                      {"boosting", seeds.boosting},
                      {"holdout", seeds.holdout}};
  doc["data"] = Json{{"table", table_name},
                     {"n_samples", table.rows.size()},
                     {"n_qualified", qualified},
                     {"prevalence", cv.prevalence},
                     {"n_folds", cv.n_folds},
                     {"positive_class", "qualified"},
                     {"decision_threshold", config.decision_threshold}};
  doc["folds"] = folds;
  doc["models"] = Json{{"random_forest", model_json(cv.forest, config.top_k)},
                       {"gradient_boosted_trees", model_json(cv.boosting, config.top_k)}};
  doc["importance_correlation"] = Json{{"all_features", cv.correlation_all},
                                       {"top_features", cv.correlation_top},
                                       {"top_feature_names", top}};
  return doc;
}

SynthSummary cmd_synth(const RunConfig& config, const fs::path& out_dir) {
  ensure_dir(out_dir);
  const StageSeeds seeds = derive_stage_seeds(config.seed);
  SceneSpec spec = config.scene;
  spec.seed = seeds.scene;
  const ReferenceScene reference = generate_reference(spec);
  const MlsScene mls = generate_mls(reference, config.error, seeds.mls);
  write_cloud(reference.cloud, out_dir / "reference.ply", CloudFileFormat::PlyBinaryLe);
  write_cloud(mls.cloud, out_dir / "mls.ply", CloudFileFormat::PlyBinaryLe);
  write_truth_csv(mls, out_dir / "truth.csv");
  log_info("synth: " + std::to_string(reference.cloud.size()) + " reference points, " +
           std::to_string(mls.cloud.size()) + " scan points");
  return {reference.cloud.size(), mls.cloud.size()};
}

LabelSummary cmd_label(const fs::path& mls_path, const fs::path& reference_path, const RunConfig& config,
                       const fs::path& out_table) {
  const PointCloud mls = read_cloud(mls_path);
  const PointCloud reference = read_cloud(reference_path);
  LabelSummary summary;
  const FeatureTable table = label_scan(mls, reference, config, &summary);
  write_feature_table(table, out_table);
  log_info("label: " + std::to_string(summary.total) + " points, " + std::to_string(summary.retained) +
           " retained below the " + std::to_string(config.cutoff) + " m cutoff, " +
           std::to_string(summary.total - summary.retained) + " dropped, " + std::to_string(summary.qualified) +
           " qualified, " + std::to_string(summary.cells) + " cells");
  return summary;
}

std::size_t cmd_features(const fs::path& mls_path, const std::optional<fs::path>& table_path,
                         const RunConfig& config, const fs::path& out_table) {
  const PointCloud mls = read_cloud(mls_path);
  FeatureTable table;
  if (table_path) {
    table = read_feature_table(*table_path);
  } else {
    table.rows.resize(mls.size());
    for (std::size_t i = 0; i < mls.size(); ++i) table.rows[i].point_index = static_cast<std::int64_t>(i);
  }
  const std::size_t dropped = add_features(table, mls, config);
  write_feature_table(table, out_table);
  log_info("features: " + std::to_string(table.rows.size()) + " rows written, " + std::to_string(dropped) +
           " dropped");
  return dropped;
}

CvReport cmd_train_eval(const fs::path& table_path, const RunConfig& config, const fs::path& out_dir,
                        bool fixed_clock) {
  const FeatureTable table = read_feature_table(table_path);
  const LabeledSamples samples = samples_from_table(table);
  ensure_dir(out_dir);
  const fs::path model_dir = out_dir / "models";
  if (config.save_models) ensure_dir(model_dir);

  const CvParams params = cv_params(config);
  FoldModelSink sink;
  if (config.save_models) {
    sink = [&](int fold, const Standardizer& s, const ForestModel& rf, const GbtModel& gbt) {
      const std::string stem = "fold" + std::to_string(fold);
      save_model({rf, samples.feature_names, s}, model_dir / (stem + "_rf.json"));
      save_model({gbt, samples.feature_names, s}, model_dir / (stem + "_gbt.json"));
    };
  }
  const CvReport cv = run_cv(samples, params, sink);

  const Json report = make_report(cv, config, table, table_path.filename().string(), fixed_clock);
  write_text(out_dir / "report.json", report.dump(2) + "\n");

  std::string csv = "point_index,fold,label,rf_score,gbt_score\n";
  char buf[160];
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const FeatureRow& row = table.rows[i];
    std::snprintf(buf, sizeof(buf), "%lld,%d,%d,%.17g,%.17g\n", static_cast<long long>(row.point_index), row.fold,
                  row.label, cv.forest.scores[i], cv.boosting.scores[i]);
    csv += buf;
  }
  write_text(out_dir / "scores.csv", csv);
  return cv;
}

std::size_t cmd_predict(const fs::path& model_path, const fs::path& table_path, const fs::path& out_csv) {
  const StoredModel model = load_model(model_path);
  const FeatureTable table = read_feature_table(table_path);
  if (!table.has_features) invalid_input("feature table has no feature columns; run 'features' first");
  const auto names = canonical_feature_names();
  if (model.feature_names != names) {
    invalid_input("model features do not match the table: model has " + std::to_string(model.feature_names.size()) +
                  " features, table has " + std::to_string(names.size()));
  }
  Matrix X(table.rows.size(), kFeatureCount);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    for (std::size_t f = 0; f < kFeatureCount; ++f) X(r, f) = table.rows[r].features[f];
  }
  const auto scores = predict(model, X);
  std::string csv = "point_index,score\n";
  char buf[64];
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    std::snprintf(buf, sizeof(buf), "%lld,%.17g\n", static_cast<long long>(table.rows[r].point_index), scores[r]);
    csv += buf;
  }
  write_text(out_csv, csv);
  return scores.size();
}

std::string cmd_report(const fs::path& report_path) {
  std::ifstream in(report_path, std::ios::binary);
  if (!in) io_error("cannot open " + report_path.string());
  Json doc;
  try {
    doc = Json::parse(in);
    std::ostringstream out;
    char buf[256];
    const Json& data = doc.at("data");
    std::snprintf(buf, sizeof(buf), "samples %lld, qualified %lld (prevalence %.4f), folds %d\n",
                  data.at("n_samples").get<long long>(), data.at("n_qualified").get<long long>(),
                  data.at("prevalence").get<double>(), data.at("n_folds").get<int>());
    out << buf;
    for (const char* model : {"random_forest", "gradient_boosted_trees"}) {
      const Json& m = doc.at("models").at(model);
      out << "\n" << model << "\n";
      std::snprintf(buf, sizeof(buf), "  %-10s %-20s %s\n", "metric", "mean +/- 95% CI", "fold values");
      out << buf;
      for (auto name : kMetricNames) {
        const std::string key(name);
        const Json& agg = m.at("aggregate").at(key);
        std::string values;
        for (const Json& v : m.at("fold_metrics").at(key)) {
          std::snprintf(buf, sizeof(buf), "%s%.4f", values.empty() ? "" : ", ", v.get<double>());
          values += buf;
        }
        std::snprintf(buf, sizeof(buf), "  %-10s %.4f +/- %.4f    [%s]\n", key.c_str(), agg.at("mean").get<double>(),
                      agg.at("ci95_half_width").get<double>(), values.c_str());
        out << buf;
      }
      out << "  top features:";
      const Json& top = m.at("top");
      for (std::size_t i = 0; i < std::min<std::size_t>(10, top.size()); ++i) {
        out << (i ? ", " : " ") << top[i].get<std::string>();
      }
      out << "\n";
    }
    const Json& corr = doc.at("importance_correlation");
    auto fmt = [&](const Json& v) {
      if (v.is_null()) return std::string("undefined");
      std::snprintf(buf, sizeof(buf), "%.4f", v.get<double>());
      return std::string(buf);
    };
    out << "\nimportance correlation: all features r = " << fmt(corr.at("all_features"))
        << ", top features r = " << fmt(corr.at("top_features")) << "\n";
    return out.str();
  } catch (const Json::exception& e) {
    invalid_input(report_path.string() + ": not a report document (" + e.what() + ")");
  }
}

}  // namespace mlsq
