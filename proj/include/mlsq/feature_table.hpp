#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mlsq/feature_names.hpp"

namespace mlsq {

using FeatureVector = std::array<double, kFeatureCount>;

struct FeatureRow {
  std::int64_t point_index = 0;
  FeatureVector features{};
  int opt_n = 0;
  double c2c = 0.0;  // meters
  int label = 0;     // 1 = qualified
  int fold = 0;
  std::int64_t cell = 0;

  friend bool operator==(const FeatureRow&, const FeatureRow&) = default;
};

/// Per-point table persisted as CSV. Column groups are optional, but a group
/// is either present for every row or absent from the header entirely.
///
/// Canonical column order:
///   point_index, <21 features>, OptN, c2c, label, fold, cell
struct FeatureTable {
  bool has_features = false;  // the 21 features plus OptN
  bool has_c2c = false;
  bool has_label = false;
  bool has_fold = false;
  bool has_cell = false;
  std::vector<FeatureRow> rows;

  std::vector<std::string> header() const;
};

/// Comma-separated, header first, reals with 9 significant digits.
void write_feature_table(const FeatureTable& table, const std::filesystem::path& path);

/// Throws InvalidInput listing unknown or misordered column names, and with
/// the 1-based line number for ragged or unparsable rows.
FeatureTable read_feature_table(const std::filesystem::path& path);

}  // namespace mlsq
