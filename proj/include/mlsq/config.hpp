#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>

#include "mlsq/boosting.hpp"
#include "mlsq/features.hpp"
#include "mlsq/forest.hpp"
#include "mlsq/model_io.hpp"
#include "mlsq/synth.hpp"

namespace mlsq {

/// Effective settings of a pipeline run. Module seeds are not stored here:
/// they are all derived from `seed`.
struct RunConfig {
  // labeling
  double cutoff = 0.100;
  double threshold = 0.020;

  // features
  FeatureParams features;
  unsigned feature_jobs = 0;

  // folds
  int n_folds = 5;
  double cell_size = 5.0;

  ForestParams rf;
  GbtParams gbt;
  double validation_fraction = 0.1;

  // eval
  double decision_threshold = 0.5;
  std::size_t top_k = 20;
  bool save_models = true;

  std::uint64_t seed = 42;

  SceneSpec scene = SceneSpec::hall();
  ErrorModel error;

  RunConfig();
};

/// Every key is always written, so the document doubles as a template.
Json config_to_json(const RunConfig& config);

/// Missing keys keep their defaults; unknown keys and mistyped values throw
/// InvalidInput naming the key.
RunConfig config_from_json(const Json& doc);

RunConfig load_config(const std::filesystem::path& path);

/// Sets the value at a dotted key path such as "rf.n_estimators". The value
/// text is read as a JSON literal when it parses as one and as a string
/// otherwise. Throws InvalidInput for a key absent from the default config.
void apply_override(Json& doc, std::string_view dotted_key, std::string_view value);

/// Seeds handed to each stage, all derived from the root seed.
struct StageSeeds {
  std::uint64_t scene;
  std::uint64_t mls;
  std::uint64_t folds;
  std::uint64_t forest;
  std::uint64_t boosting;
  std::uint64_t holdout;
};

StageSeeds derive_stage_seeds(std::uint64_t root);

}  // namespace mlsq
