#include "mlsq/model_io.hpp"

#include <fstream>
#include <sstream>

#include "mlsq/error.hpp"

namespace mlsq {
namespace {

constexpr int kFormatVersion = 1;
constexpr const char* kForestKind = "random_forest";
constexpr const char* kBoostedKind = "gradient_boosted_trees";

Json tree_to_json(const DecisionTree& tree) {
  std::vector<std::int32_t> feature, left, right;
  std::vector<double> threshold, value;
  feature.reserve(tree.nodes.size());
  for (const TreeNode& n : tree.nodes) {
    feature.push_back(n.feature);
    threshold.push_back(n.threshold);
    left.push_back(n.left);
    right.push_back(n.right);
    value.push_back(n.value);
  }
  Json j;
  j["feature"] = feature;
  j["threshold"] = threshold;
  j["left"] = left;
  j["right"] = right;
  j["value"] = value;
  return j;
}

DecisionTree tree_from_json(const Json& j, std::size_t n_features) {
  const auto feature = j.at("feature").get<std::vector<std::int32_t>>();
  const auto threshold = j.at("threshold").get<std::vector<double>>();
  const auto left = j.at("left").get<std::vector<std::int32_t>>();
  const auto right = j.at("right").get<std::vector<std::int32_t>>();
  const auto value = j.at("value").get<std::vector<double>>();
  const std::size_t n = feature.size();
  if (n == 0 || threshold.size() != n || left.size() != n || right.size() != n || value.size() != n) {
    invalid_input("model tree arrays are empty or have mismatched lengths");
  }
  DecisionTree tree;
  tree.nodes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    TreeNode& node = tree.nodes[i];
    node = TreeNode{feature[i], threshold[i], left[i], right[i], value[i]};
    if (node.is_leaf()) continue;
    // Children always follow their parent, which also rules out cycles.
    const auto self = static_cast<std::int64_t>(i);
    if (static_cast<std::size_t>(node.feature) >= n_features || node.left <= self || node.right <= self ||
        static_cast<std::size_t>(node.left) >= n || static_cast<std::size_t>(node.right) >= n) {
      invalid_input("model tree node " + std::to_string(i) + " is malformed");
    }
  }
  return tree;
}

Json forest_params_json(const ForestParams& p) {
  return Json{{"n_estimators", p.n_estimators},
              {"max_depth", p.max_depth},
              {"max_samples", p.max_samples},
              {"class_weight", p.balanced_class_weight ? "balanced" : "none"},
              {"min_samples_leaf", p.min_samples_leaf},
              {"n_jobs", p.n_jobs},
              {"seed", p.seed},
              {"subsample_threshold", p.subsample_threshold},
              {"subsample_fraction", p.subsample_fraction}};
}

ForestParams forest_params_from_json(const Json& j) {
  ForestParams p;
  p.n_estimators = j.at("n_estimators").get<int>();
  p.max_depth = j.at("max_depth").get<int>();
  p.max_samples = j.at("max_samples").get<double>();
  p.balanced_class_weight = j.at("class_weight").get<std::string>() == "balanced";
  p.min_samples_leaf = j.at("min_samples_leaf").get<int>();
  p.n_jobs = j.at("n_jobs").get<unsigned>();
  p.seed = j.at("seed").get<std::uint64_t>();
  p.subsample_threshold = j.at("subsample_threshold").get<std::size_t>();
  p.subsample_fraction = j.at("subsample_fraction").get<double>();
  return p;
}

Json gbt_params_json(const GbtParams& p) {
  Json j{{"objective", "binary:logistic"},
         {"eval_metric", "logloss"},
         {"tree_method", "hist"},
         {"max_depth", p.max_depth},
         {"eta", p.eta},
         {"subsample", p.subsample},
         {"colsample_bytree", p.colsample_bytree},
         {"num_boost_round", p.num_boost_round},
         {"early_stopping_rounds", p.early_stopping_rounds},
         {"n_bins", p.n_bins},
         {"lambda", p.lambda},
         {"min_child_weight", p.min_child_weight}};
  j["scale_pos_weight"] = p.scale_pos_weight ? Json(*p.scale_pos_weight) : Json(nullptr);
  j["n_jobs"] = p.n_jobs;
  j["seed"] = p.seed;
  return j;
}

GbtParams gbt_params_from_json(const Json& j) {
  GbtParams p;
  p.max_depth = j.at("max_depth").get<int>();
  p.eta = j.at("eta").get<double>();
  p.subsample = j.at("subsample").get<double>();
  p.colsample_bytree = j.at("colsample_bytree").get<double>();
  p.num_boost_round = j.at("num_boost_round").get<int>();
  p.early_stopping_rounds = j.at("early_stopping_rounds").get<int>();
  p.n_bins = j.at("n_bins").get<int>();
  p.lambda = j.at("lambda").get<double>();
  p.min_child_weight = j.at("min_child_weight").get<double>();
  if (!j.at("scale_pos_weight").is_null()) p.scale_pos_weight = j.at("scale_pos_weight").get<double>();
  p.n_jobs = j.at("n_jobs").get<unsigned>();
  p.seed = j.at("seed").get<std::uint64_t>();
  return p;
}

}  // namespace

const std::vector<double>& StoredModel::feature_importance() const {
  return std::visit([](const auto& m) -> const std::vector<double>& { return m.feature_importance; }, model);
}

Json model_to_json(const StoredModel& stored) {
  Json doc;
  doc["model_kind"] = stored.is_forest() ? kForestKind : kBoostedKind;
  doc["format_version"] = kFormatVersion;
  doc["feature_names"] = stored.feature_names;
  if (stored.standardizer) {
    const Standardizer& s = *stored.standardizer;
    doc["standardizer"] = Json{{"mean", s.mean()}, {"stddev", s.stddev()}};
  }

  Json trees = Json::array();
  if (const auto* rf = std::get_if<ForestModel>(&stored.model)) {
    doc["params"] = forest_params_json(rf->params);
    doc["metadata"] = Json{{"n_features", rf->n_features},
                           {"n_rows", rf->n_rows},
                           {"class_counts", rf->class_counts},
                           {"criterion", "gini"},
                           {"bootstrap", "without_replacement"},
                           {"max_features", "all"}};
    doc["feature_importance"] = rf->feature_importance;
    for (const auto& t : rf->trees) trees.push_back(tree_to_json(t));
  } else {
    const auto& gbt = std::get<GbtModel>(stored.model);
    doc["params"] = gbt_params_json(gbt.params);
    doc["metadata"] = Json{{"n_features", gbt.n_features},
                           {"base_score", 0.5},
                           {"scale_pos_weight", gbt.scale_pos_weight},
                           {"best_iteration", gbt.best_iteration},
                           {"rounds_completed", gbt.trees.size()},
                           {"validation_logloss", gbt.validation_logloss},
                           {"training_objective", gbt.training_objective}};
    doc["feature_importance"] = gbt.feature_importance;
    for (const auto& t : gbt.trees) trees.push_back(tree_to_json(t));
  }
  doc["trees"] = std::move(trees);
  return doc;
}

StoredModel model_from_json(const Json& doc) {
  try {
    const auto kind = doc.at("model_kind").get<std::string>();
    const int version = doc.at("format_version").get<int>();
    if (version != kFormatVersion) invalid_input("unsupported model format_version " + std::to_string(version));

    StoredModel stored;
    stored.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
    if (doc.contains("standardizer")) {
      const Json& s = doc.at("standardizer");
      stored.standardizer = Standardizer::from_parts(s.at("mean").get<std::vector<double>>(),
                                                     s.at("stddev").get<std::vector<double>>());
    }
    const Json& meta = doc.at("metadata");
    const auto n_features = meta.at("n_features").get<std::size_t>();
    if (stored.feature_names.size() != n_features) invalid_input("feature_names length does not match n_features");
    if (stored.standardizer && stored.standardizer->mean().size() != n_features) {
      invalid_input("standardizer arity does not match n_features");
    }

    std::vector<DecisionTree> trees;
    for (const Json& t : doc.at("trees")) trees.push_back(tree_from_json(t, n_features));
    auto importance = doc.at("feature_importance").get<std::vector<double>>();

    if (kind == kForestKind) {
      ForestModel rf;
      rf.params = forest_params_from_json(doc.at("params"));
      rf.n_features = n_features;
      rf.n_rows = meta.at("n_rows").get<std::size_t>();
      rf.class_counts = meta.at("class_counts").get<std::array<std::size_t, 2>>();
      rf.trees = std::move(trees);
      rf.feature_importance = std::move(importance);
      stored.model = std::move(rf);
    } else if (kind == kBoostedKind) {
      GbtModel gbt;
      gbt.params = gbt_params_from_json(doc.at("params"));
      gbt.n_features = n_features;
      gbt.scale_pos_weight = meta.at("scale_pos_weight").get<double>();
      gbt.best_iteration = meta.at("best_iteration").get<int>();
      gbt.validation_logloss = meta.at("validation_logloss").get<std::vector<double>>();
      gbt.training_objective = meta.at("training_objective").get<std::vector<double>>();
      gbt.trees = std::move(trees);
      gbt.feature_importance = std::move(importance);
      if (gbt.best_tree_count() > gbt.trees.size()) invalid_input("best_iteration exceeds tree count");
      stored.model = std::move(gbt);
    } else {
      invalid_input("unknown model_kind '" + kind + "'");
    }
    return stored;
  } catch (const Json::exception& e) {
    invalid_input(std::string("malformed model document: ") + e.what());
  }
}

void save_model(const StoredModel& stored, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) io_error("cannot write " + path.string());
  out << model_to_json(stored).dump() << '\n';
  if (!out) io_error("write failed for " + path.string());
}

StoredModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_error("cannot open " + path.string());
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::exception& e) {
    invalid_input(path.string() + ": " + e.what());
  }
  return model_from_json(doc);
}

std::vector<double> predict(const StoredModel& stored, const Matrix& raw_rows) {
  const Matrix rows = stored.standardizer ? stored.standardizer->apply(raw_rows) : raw_rows;
  return std::visit([&](const auto& m) { return predict_proba(m, rows); }, stored.model);
}

}  // namespace mlsq
