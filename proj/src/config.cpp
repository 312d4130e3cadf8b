#include "mlsq/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <string>

#include "mlsq/error.hpp"
#include "mlsq/random.hpp"

namespace mlsq {
namespace {

// Typed access to one config section; errors carry the dotted key.
class Section {
 public:
  Section(const Json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {}

  const Json& at(const std::string& key) const {
    if (!j_.contains(key)) invalid_input("missing config key '" + name(key) + "'");
    return j_.at(key);
  }
  std::string name(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

  double real(const std::string& key) const {
    const Json& v = at(key);
    if (!v.is_number()) fail(key, "a number");
    return v.get<double>();
  }
  std::int64_t integer(const std::string& key) const {
    const Json& v = at(key);
    if (v.is_number_integer()) return v.get<std::int64_t>();
    if (v.is_number_float()) {
      const double d = v.get<double>();
      if (std::isfinite(d) && d == std::floor(d) && std::abs(d) < 9e15) return static_cast<std::int64_t>(d);
    }
    fail(key, "an integer");
  }
  std::uint64_t non_negative(const std::string& key) const {
    const Json& v = at(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    const std::int64_t i = integer(key);
    if (i < 0) fail(key, "a non-negative integer");
    return static_cast<std::uint64_t>(i);
  }
  int small_int(const std::string& key) const {
    const std::int64_t i = integer(key);
    if (i < std::numeric_limits<int>::min() || i > std::numeric_limits<int>::max()) fail(key, "a 32-bit integer");
    return static_cast<int>(i);
  }
  bool boolean(const std::string& key) const {
    const Json& v = at(key);
    if (!v.is_boolean()) fail(key, "true or false");
    return v.get<bool>();
  }
  std::string text(const std::string& key) const {
    const Json& v = at(key);
    if (!v.is_string()) fail(key, "a string");
    return v.get<std::string>();
  }
  Section sub(const std::string& key) const {
    const Json& v = at(key);
    if (!v.is_object()) fail(key, "an object");
    return Section(v, name(key));
  }

  [[noreturn]] void fail(const std::string& key, const std::string& expected) const {
    invalid_input("config key '" + name(key) + "' must be " + expected);
  }

 private:
  const Json& j_;
  std::string prefix_;
};

void reject_unknown(const Json& known, const Json& given, const std::string& prefix) {
  for (auto it = given.begin(); it != given.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!known.contains(it.key())) invalid_input("unknown config key '" + key + "'");
    const Json& k = known.at(it.key());
    if (k.is_object()) {
      if (!it.value().is_object()) invalid_input("config key '" + key + "' must be an object");
      reject_unknown(k, it.value(), key);
    }
  }
}

void merge_into(Json& base, const Json& patch) {
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    if (base.contains(it.key()) && base[it.key()].is_object() && it.value().is_object()) {
      merge_into(base[it.key()], it.value());
    } else {
      base[it.key()] = it.value();
    }
  }
}

Json walls_json(const std::vector<WallSegment>& walls) {
  Json out = Json::array();
  for (const WallSegment& w : walls) {
    out.push_back(Json{{"x0", w.x0}, {"y0", w.y0}, {"x1", w.x1}, {"y1", w.y1}, {"height", w.height},
                       {"thickness", w.thickness}});
  }
  return out;
}

std::vector<WallSegment> walls_from_json(const Json& j) {
  if (!j.is_array()) invalid_input("config key 'synth.walls' must be an array");
  std::vector<WallSegment> walls;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const Section s(j[i], "synth.walls[" + std::to_string(i) + "]");
    walls.push_back({s.real("x0"), s.real("y0"), s.real("x1"), s.real("y1"), s.real("height"), s.real("thickness")});
  }
  return walls;
}

}  // namespace

RunConfig::RunConfig() {
  rf.n_jobs = 0;
  gbt.n_jobs = 0;
}

Json config_to_json(const RunConfig& c) {
  Json doc;
  doc["labeling"] = Json{{"cutoff", c.cutoff}, {"threshold", c.threshold}};
  doc["features"] = Json{{"k_min", c.features.neighborhood.k_min},
                         {"k_max", c.features.neighborhood.k_max},
                         {"k_step", c.features.neighborhood.k_step},
                         {"acc_bin_size", c.features.acc_bin_size},
                         {"leaf_size", c.features.leaf_size},
                         {"n_jobs", c.feature_jobs}};
  doc["folds"] = Json{{"n_folds", c.n_folds}, {"cell_size", c.cell_size}};
  doc["rf"] = Json{{"n_estimators", c.rf.n_estimators},
                   {"max_depth", c.rf.max_depth},
                   {"max_samples", c.rf.max_samples},
                   {"class_weight", c.rf.balanced_class_weight ? "balanced" : "none"},
                   {"min_samples_leaf", c.rf.min_samples_leaf},
                   {"subsample_threshold", c.rf.subsample_threshold},
                   {"subsample_fraction", c.rf.subsample_fraction},
                   {"n_jobs", c.rf.n_jobs}};
  Json gbt{{"max_depth", c.gbt.max_depth},
           {"eta", c.gbt.eta},
           {"subsample", c.gbt.subsample},
           {"colsample_bytree", c.gbt.colsample_bytree},
           {"num_boost_round", c.gbt.num_boost_round},
           {"early_stopping_rounds", c.gbt.early_stopping_rounds},
           {"n_bins", c.gbt.n_bins},
           {"lambda", c.gbt.lambda},
           {"min_child_weight", c.gbt.min_child_weight}};
  gbt["scale_pos_weight"] = c.gbt.scale_pos_weight ? Json(*c.gbt.scale_pos_weight) : Json("auto");
  gbt["validation_fraction"] = c.validation_fraction;
  gbt["n_jobs"] = c.gbt.n_jobs;
  doc["gbt"] = std::move(gbt);
  doc["eval"] = Json{{"threshold", c.decision_threshold}, {"top_k", c.top_k}, {"save_models", c.save_models}};
  doc["seed"] = c.seed;

  const SceneSpec& s = c.scene;
  const ErrorModel& e = c.error;
  doc["synth"] = Json{{"floor_x", s.floor_x},
                      {"floor_y", s.floor_y},
                      {"walls", walls_json(s.walls)},
                      {"box_count", s.box_count},
                      {"box_size_min", s.box_size_min},
                      {"box_size_max", s.box_size_max},
                      {"box_height_min", s.box_height_min},
                      {"box_height_max", s.box_height_max},
                      {"clutter_density", s.clutter_density},
                      {"clutter_size_min", s.clutter_size_min},
                      {"clutter_size_max", s.clutter_size_max},
                      {"reference_density", s.reference_density},
                      {"error", Json{{"sigma0", e.sigma0},
                                     {"height_gain", e.height_gain},
                                     {"height_scale", e.height_scale},
                                     {"edge_gain", e.edge_gain},
                                     {"edge_radius", e.edge_radius},
                                     {"sparse_gain", e.sparse_gain},
                                     {"drift_amplitude", e.drift_amplitude},
                                     {"drift_wavelength", e.drift_wavelength},
                                     {"trajectory_y", e.trajectory_y},
                                     {"keep_max", e.keep_max},
                                     {"keep_min", e.keep_min},
                                     {"keep_decay", e.keep_decay}}}};
  return doc;
}

RunConfig config_from_json(const Json& given) {
  if (!given.is_object()) invalid_input("config must be a JSON object");
  const Json defaults = config_to_json(RunConfig{});
  reject_unknown(defaults, given, "");
  Json doc = defaults;
  merge_into(doc, given);

  RunConfig c;
  const Section root(doc, "");
  {
    const Section s = root.sub("labeling");
    c.cutoff = s.real("cutoff");
    c.threshold = s.real("threshold");
    if (!(c.cutoff > 0.0)) s.fail("cutoff", "positive");
    if (!(c.threshold > 0.0 && c.threshold < c.cutoff)) s.fail("threshold", "positive and below the cutoff");
  }
  {
    const Section s = root.sub("features");
    c.features.neighborhood.k_min = s.small_int("k_min");
    c.features.neighborhood.k_max = s.small_int("k_max");
    c.features.neighborhood.k_step = s.small_int("k_step");
    c.features.acc_bin_size = s.real("acc_bin_size");
    c.features.leaf_size = s.non_negative("leaf_size");
    c.feature_jobs = static_cast<unsigned>(s.non_negative("n_jobs"));
    if (c.features.neighborhood.k_min < 3) s.fail("k_min", "at least 3");
    if (c.features.neighborhood.k_max < c.features.neighborhood.k_min) s.fail("k_max", "at least k_min");
    if (c.features.neighborhood.k_step < 1) s.fail("k_step", "at least 1");
    if (!(c.features.acc_bin_size > 0.0)) s.fail("acc_bin_size", "positive");
    if (c.features.leaf_size < 1) s.fail("leaf_size", "at least 1");
  }
  {
    const Section s = root.sub("folds");
    c.n_folds = s.small_int("n_folds");
    c.cell_size = s.real("cell_size");
    if (c.n_folds < 2) s.fail("n_folds", "at least 2");
    if (!(c.cell_size > 0.0)) s.fail("cell_size", "positive");
  }
  {
    const Section s = root.sub("rf");
    c.rf.n_estimators = s.small_int("n_estimators");
    c.rf.max_depth = s.small_int("max_depth");
    c.rf.max_samples = s.real("max_samples");
    const std::string cw = s.text("class_weight");
    if (cw != "balanced" && cw != "none") s.fail("class_weight", "\"balanced\" or \"none\"");
    c.rf.balanced_class_weight = cw == "balanced";
    c.rf.min_samples_leaf = s.small_int("min_samples_leaf");
    c.rf.subsample_threshold = s.non_negative("subsample_threshold");
    c.rf.subsample_fraction = s.real("subsample_fraction");
    c.rf.n_jobs = static_cast<unsigned>(s.non_negative("n_jobs"));
    if (c.rf.n_estimators < 1) s.fail("n_estimators", "at least 1");
    if (!(c.rf.max_samples > 0.0 && c.rf.max_samples <= 1.0)) s.fail("max_samples", "in (0, 1]");
    if (c.rf.min_samples_leaf < 1) s.fail("min_samples_leaf", "at least 1");
    if (!(c.rf.subsample_fraction > 0.0 && c.rf.subsample_fraction <= 1.0)) s.fail("subsample_fraction", "in (0, 1]");
  }
  {
    const Section s = root.sub("gbt");
    c.gbt.max_depth = s.small_int("max_depth");
    c.gbt.eta = s.real("eta");
    c.gbt.subsample = s.real("subsample");
    c.gbt.colsample_bytree = s.real("colsample_bytree");
    c.gbt.num_boost_round = s.small_int("num_boost_round");
    c.gbt.early_stopping_rounds = s.small_int("early_stopping_rounds");
    c.gbt.n_bins = s.small_int("n_bins");
    c.gbt.lambda = s.real("lambda");
    c.gbt.min_child_weight = s.real("min_child_weight");
    const Json& spw = s.at("scale_pos_weight");
    if (spw.is_string() && spw.get<std::string>() == "auto") {
      c.gbt.scale_pos_weight.reset();
    } else if (spw.is_number() && spw.get<double>() > 0.0) {
      c.gbt.scale_pos_weight = spw.get<double>();
    } else {
      s.fail("scale_pos_weight", "\"auto\" or a positive number");
    }
    c.validation_fraction = s.real("validation_fraction");
    c.gbt.n_jobs = static_cast<unsigned>(s.non_negative("n_jobs"));
    if (c.gbt.max_depth < 1) s.fail("max_depth", "at least 1");
    if (!(c.gbt.eta > 0.0)) s.fail("eta", "positive");
    if (!(c.gbt.subsample > 0.0 && c.gbt.subsample <= 1.0)) s.fail("subsample", "in (0, 1]");
    if (!(c.gbt.colsample_bytree > 0.0 && c.gbt.colsample_bytree <= 1.0)) s.fail("colsample_bytree", "in (0, 1]");
    if (c.gbt.num_boost_round < 0) s.fail("num_boost_round", "non-negative");
    if (c.gbt.early_stopping_rounds < 1) s.fail("early_stopping_rounds", "at least 1");
    if (c.gbt.n_bins < 2 || c.gbt.n_bins > 65536) s.fail("n_bins", "in [2, 65536]");
    if (!(c.gbt.lambda >= 0.0)) s.fail("lambda", "non-negative");
    if (!(c.gbt.min_child_weight >= 0.0)) s.fail("min_child_weight", "non-negative");
    if (!(c.validation_fraction > 0.0 && c.validation_fraction < 1.0)) s.fail("validation_fraction", "in (0, 1)");
  }
  {
    const Section s = root.sub("eval");
    c.decision_threshold = s.real("threshold");
    c.top_k = s.non_negative("top_k");
    c.save_models = s.boolean("save_models");
  }
  c.seed = root.non_negative("seed");
  {
    const Section s = root.sub("synth");
    c.scene.floor_x = s.real("floor_x");
    c.scene.floor_y = s.real("floor_y");
    c.scene.walls = walls_from_json(s.at("walls"));
    c.scene.box_count = s.small_int("box_count");
    c.scene.box_size_min = s.real("box_size_min");
    c.scene.box_size_max = s.real("box_size_max");
    c.scene.box_height_min = s.real("box_height_min");
    c.scene.box_height_max = s.real("box_height_max");
    c.scene.clutter_density = s.real("clutter_density");
    c.scene.clutter_size_min = s.real("clutter_size_min");
    c.scene.clutter_size_max = s.real("clutter_size_max");
    c.scene.reference_density = s.real("reference_density");
    const Section e = s.sub("error");
    c.error.sigma0 = e.real("sigma0");
    c.error.height_gain = e.real("height_gain");
    c.error.height_scale = e.real("height_scale");
    c.error.edge_gain = e.real("edge_gain");
    c.error.edge_radius = e.real("edge_radius");
    c.error.sparse_gain = e.real("sparse_gain");
    c.error.drift_amplitude = e.real("drift_amplitude");
    c.error.drift_wavelength = e.real("drift_wavelength");
    c.error.trajectory_y = e.real("trajectory_y");
    c.error.keep_max = e.real("keep_max");
    c.error.keep_min = e.real("keep_min");
    c.error.keep_decay = e.real("keep_decay");
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_error("cannot open config " + path.string());
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::exception& e) {
    invalid_input(path.string() + ": " + e.what());
  }
  return config_from_json(doc);
}

void apply_override(Json& doc, std::string_view dotted_key, std::string_view value) {
  const Json defaults = config_to_json(RunConfig{});
  const Json* known = &defaults;
  Json* target = &doc;
  std::string key(dotted_key);
  std::size_t start = 0;
  for (;;) {
    const std::size_t dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!known->is_object() || !known->contains(part)) invalid_input("unknown config key '" + key + "'");
    known = &known->at(part);
    if (dot == std::string::npos) {
      Json parsed;
      try {
        parsed = Json::parse(value);
      } catch (const Json::exception&) {
        parsed = std::string(value);
      }
      (*target)[part] = std::move(parsed);
      return;
    }
    if (!known->is_object()) invalid_input("config key '" + key.substr(0, dot) + "' is not a section");
    if (!target->contains(part) || !(*target)[part].is_object()) (*target)[part] = Json::object();
    target = &(*target)[part];
    start = dot + 1;
  }
}

StageSeeds derive_stage_seeds(std::uint64_t root) {
  return {derive_seed(root, 0x7363656eULL), derive_seed(root, 0x6d6c7300ULL), derive_seed(root, 0x666f6c64ULL),
          derive_seed(root, 0x666f7265ULL), derive_seed(root, 0x626f6f73ULL), derive_seed(root, 0x686f6c64ULL)};
}

}  // namespace mlsq
