#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "mlsq/boosting.hpp"
#include "mlsq/features.hpp"
#include "mlsq/forest.hpp"

namespace mlsq {

using Json = nlohmann::ordered_json;

/// A trained classifier together with everything needed to score raw
/// feature rows: the column names it was trained on and, optionally, the
/// standardizer fitted on its training rows.
struct StoredModel {
  std::variant<ForestModel, GbtModel> model;
  std::vector<std::string> feature_names;
  std::optional<Standardizer> standardizer;

  bool is_forest() const noexcept { return std::holds_alternative<ForestModel>(model); }
  const std::vector<double>& feature_importance() const;
};

Json model_to_json(const StoredModel& stored);

/// Throws InvalidInput for an unknown model_kind or format_version, or for
/// structurally broken trees (child index out of range, cycles).
StoredModel model_from_json(const Json& doc);

void save_model(const StoredModel& stored, const std::filesystem::path& path);
StoredModel load_model(const std::filesystem::path& path);

/// Standardizes (when a standardizer is stored) and scores raw rows.
std::vector<double> predict(const StoredModel& stored, const Matrix& raw_rows);

}  // namespace mlsq
