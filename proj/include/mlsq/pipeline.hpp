#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "mlsq/config.hpp"
#include "mlsq/cross_validation.hpp"
#include "mlsq/feature_table.hpp"
#include "mlsq/geometry.hpp"

namespace mlsq {

namespace fs = std::filesystem;

// In-memory stages. The cmd_* functions below wrap them with file IO.

struct LabelSummary {
  std::size_t total = 0;
  std::size_t retained = 0;
  std::size_t qualified = 0;
  std::size_t cells = 0;
};

/// C2C distance, cutoff, label, grid cell and fold for every MLS point that
/// survives the cutoff. Rows reference positions in `mls`.
FeatureTable label_scan(const PointCloud& mls, const PointCloud& reference, const RunConfig& config,
                        LabelSummary* summary = nullptr);

/// Computes features for every row (neighborhoods come from the whole scan)
/// and removes rows whose neighborhood is degenerate. Returns the number of
/// rows removed.
std::size_t add_features(FeatureTable& table, const PointCloud& mls, const RunConfig& config);

/// Requires the feature, label and fold column groups.
LabeledSamples samples_from_table(const FeatureTable& table);

CvParams cv_params(const RunConfig& config);

/// Report document. With `fixed_clock` the timestamp is a constant so that
/// identical runs produce identical bytes.
Json make_report(const CvReport& cv, const RunConfig& config, const FeatureTable& table,
                 const std::string& table_name, bool fixed_clock);

// File-level subcommands.

struct SynthSummary {
  std::size_t reference_points = 0;
  std::size_t mls_points = 0;
};

/// Writes reference.ply, mls.ply (binary little-endian) and truth.csv.
SynthSummary cmd_synth(const RunConfig& config, const fs::path& out_dir);

LabelSummary cmd_label(const fs::path& mls_path, const fs::path& reference_path, const RunConfig& config,
                       const fs::path& out_table);

/// Without an input table every point of the scan gets a row.
std::size_t cmd_features(const fs::path& mls_path, const std::optional<fs::path>& table_path,
                         const RunConfig& config, const fs::path& out_table);

/// Writes report.json, scores.csv and, when enabled, per-fold model files
/// under models/.
CvReport cmd_train_eval(const fs::path& table_path, const RunConfig& config, const fs::path& out_dir,
                        bool fixed_clock);

/// Writes point_index,score for every row of the table.
std::size_t cmd_predict(const fs::path& model_path, const fs::path& table_path, const fs::path& out_csv);

/// Human-readable summary of a report.json.
std::string cmd_report(const fs::path& report_path);

}  // namespace mlsq
