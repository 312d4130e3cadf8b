#include "mlsq/boosting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "mlsq/error.hpp"
#include "mlsq/parallel.hpp"
#include "mlsq/random.hpp"

namespace mlsq {
namespace {

constexpr double kMinHessian = 1e-16;
constexpr double kMinSplitGain = 1e-10;
constexpr double kProbClamp = 1e-15;

struct BinnedMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint16_t> bins;  // row-major

  std::uint16_t operator()(std::size_t r, std::size_t c) const { return bins[r * cols + c]; }
};

BinnedMatrix bin_matrix(const Matrix& X, const HistogramCuts& cuts, unsigned threads) {
  BinnedMatrix out{X.rows(), X.cols(), std::vector<std::uint16_t>(X.rows() * X.cols())};
  parallel_for(X.rows(), threads, [&](std::size_t r) {
    for (std::size_t c = 0; c < X.cols(); ++c) out.bins[r * X.cols() + c] = cuts.bin_of(c, X(r, c));
  });
  return out;
}

struct Bin {
  double grad = 0.0;
  double hess = 0.0;
};

// Tree grown over bin indices; thresholds are filled in from the cuts.
struct GrowNode {
  std::size_t begin = 0;  // range into the sampled-row array
  std::size_t end = 0;
  double grad = 0.0;
  double hess = 0.0;
  std::int32_t tree_id = 0;
  std::vector<Bin> hist;  // n_sampled_features x max_bins
};

struct TreeBuild {
  DecisionTree tree;
  std::vector<std::int32_t> split_bin;  // per node, -1 for leaves
  std::vector<double> gain_per_feature;
};

class BoostTreeGrower {
 public:
  BoostTreeGrower(const BinnedMatrix& X, const HistogramCuts& cuts, const GbtParams& params,
                  std::size_t max_bins)
      : X_(X), cuts_(cuts), params_(params), max_bins_(max_bins) {}

  TreeBuild grow(std::span<const GradientPair> gpair, std::vector<std::uint32_t>& rows,
                 const std::vector<std::size_t>& features) {
    features_ = &features;
    gpair_ = gpair;
    TreeBuild out;
    out.gain_per_feature.assign(X_.cols, 0.0);

    GrowNode root;
    root.begin = 0;
    root.end = rows.size();
    root.tree_id = 0;
    out.tree.nodes.emplace_back();
    out.split_bin.push_back(-1);
    build_hist(root, rows);
    for (std::uint32_t r : std::span(rows.data() + root.begin, root.end - root.begin)) {
      root.grad += gpair[r].grad;
      root.hess += gpair[r].hess;
    }

    std::vector<GrowNode> level;
    level.push_back(std::move(root));
    for (int depth = 0; !level.empty(); ++depth) {
      std::vector<GrowNode> next;
      for (GrowNode& node : level) {
        TreeNode& tn = out.tree.nodes[static_cast<std::size_t>(node.tree_id)];
        tn.value = leaf_weight(node.grad, node.hess);
        if (depth >= params_.max_depth) continue;
        const Candidate c = best_split(node);
        if (!c.found) continue;

        const std::size_t feature = (*features_)[c.feature_slot];
        auto first = rows.begin() + static_cast<std::ptrdiff_t>(node.begin);
        auto last = rows.begin() + static_cast<std::ptrdiff_t>(node.end);
        auto mid = std::stable_partition(first, last, [&](std::uint32_t r) {
          return X_(r, feature) <= c.bin;
        });
        const std::size_t split_at = static_cast<std::size_t>(mid - rows.begin());

        GrowNode left, right;
        left.begin = node.begin;
        left.end = split_at;
        left.grad = c.left_grad;
        left.hess = c.left_hess;
        right.begin = split_at;
        right.end = node.end;
        right.grad = node.grad - c.left_grad;
        right.hess = node.hess - c.left_hess;

        // Histogram subtraction: scan the smaller child, derive the larger.
        GrowNode& small = (left.end - left.begin) <= (right.end - right.begin) ? left : right;
        GrowNode& large = (&small == &left) ? right : left;
        build_hist(small, rows);
        large.hist.resize(node.hist.size());
        for (std::size_t i = 0; i < node.hist.size(); ++i) {
          large.hist[i].grad = node.hist[i].grad - small.hist[i].grad;
          large.hist[i].hess = node.hist[i].hess - small.hist[i].hess;
        }
        node.hist.clear();
        node.hist.shrink_to_fit();

        left.tree_id = static_cast<std::int32_t>(out.tree.nodes.size());
        right.tree_id = left.tree_id + 1;
        out.tree.nodes.emplace_back();
        out.tree.nodes.emplace_back();
        out.split_bin.push_back(-1);
        out.split_bin.push_back(-1);
        TreeNode& parent = out.tree.nodes[static_cast<std::size_t>(node.tree_id)];
        parent.feature = static_cast<std::int32_t>(feature);
        parent.threshold = cuts_.cuts[feature][c.bin];
        parent.left = left.tree_id;
        parent.right = right.tree_id;
        out.split_bin[static_cast<std::size_t>(node.tree_id)] = static_cast<std::int32_t>(c.bin);
        out.gain_per_feature[feature] += c.gain;

        next.push_back(std::move(left));
        next.push_back(std::move(right));
      }
      level = std::move(next);
    }
    return out;
  }

 private:
  struct Candidate {
    bool found = false;
    std::size_t feature_slot = 0;
    std::size_t bin = 0;
    double gain = 0.0;
    double left_grad = 0.0;
    double left_hess = 0.0;
  };

  double leaf_weight(double g, double h) const { return -g / (h + params_.lambda); }

  double score(double g, double h) const { return g * g / (h + params_.lambda); }

  void build_hist(GrowNode& node, const std::vector<std::uint32_t>& rows) const {
    const auto& feats = *features_;
    node.hist.assign(feats.size() * max_bins_, Bin{});
    for (std::size_t i = node.begin; i < node.end; ++i) {
      const std::uint32_t r = rows[i];
      const GradientPair gp = gpair_[r];
      const std::uint16_t* row_bins = X_.bins.data() + static_cast<std::size_t>(r) * X_.cols;
      Bin* h = node.hist.data();
      for (std::size_t j = 0; j < feats.size(); ++j, h += max_bins_) {
        Bin& b = h[row_bins[feats[j]]];
        b.grad += gp.grad;
        b.hess += gp.hess;
      }
    }
  }

  // Scans bin boundaries of every sampled feature. Ties keep the lowest
  // feature index, then the lowest boundary.
  Candidate best_split(const GrowNode& node) const {
    Candidate best;
    const double parent = score(node.grad, node.hess);
    const auto& feats = *features_;
    for (std::size_t j = 0; j < feats.size(); ++j) {
      const std::size_t nb = cuts_.bin_count(feats[j]);
      const Bin* h = node.hist.data() + j * max_bins_;
      double gl = 0.0, hl = 0.0;
      for (std::size_t b = 0; b + 1 < nb; ++b) {
        gl += h[b].grad;
        hl += h[b].hess;
        const double gr = node.grad - gl;
        const double hr = node.hess - hl;
        if (hl < params_.min_child_weight || hr < params_.min_child_weight) continue;
        const double gain = 0.5 * (score(gl, hl) + score(gr, hr) - parent);
        if (!(gain > kMinSplitGain)) continue;
        if (!best.found || gain > best.gain) {
          best = Candidate{true, j, b, gain, gl, hl};
        }
      }
    }
    return best;
  }

  const BinnedMatrix& X_;
  const HistogramCuts& cuts_;
  const GbtParams& params_;
  std::size_t max_bins_;
  const std::vector<std::size_t>* features_ = nullptr;
  std::span<const GradientPair> gpair_;
};

double tree_output_binned(const TreeBuild& t, const BinnedMatrix& X, std::size_t r) {
  std::size_t id = 0;
  while (!t.tree.nodes[id].is_leaf()) {
    const TreeNode& n = t.tree.nodes[id];
    const bool left = X(r, static_cast<std::size_t>(n.feature)) <= t.split_bin[id];
    id = static_cast<std::size_t>(left ? n.left : n.right);
  }
  return t.tree.nodes[id].value;
}

double weighted_logloss(std::span<const std::uint8_t> y, std::span<const double> margin, double spw) {
  double total = 0.0, weight = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double p = std::clamp(sigmoid(margin[i]), kProbClamp, 1.0 - kProbClamp);
    const double w = y[i] ? spw : 1.0;
    total -= w * (y[i] ? std::log(p) : std::log(1.0 - p));
    weight += w;
  }
  return total / weight;
}

double margin_logloss(std::span<const std::uint8_t> y, std::span<const double> margin) {
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double p = std::clamp(sigmoid(margin[i]), kProbClamp, 1.0 - kProbClamp);
    total -= y[i] ? std::log(p) : std::log(1.0 - p);
  }
  return total / static_cast<double>(y.size());
}

}  // namespace

std::uint16_t HistogramCuts::bin_of(std::size_t feature, double value) const {
  const auto& c = cuts[feature];
  return static_cast<std::uint16_t>(std::lower_bound(c.begin(), c.end(), value) - c.begin());
}

HistogramCuts build_cuts(const Matrix& X, int n_bins) {
  if (n_bins < 2 || n_bins > 65536) invalid_input("n_bins must be in [2, 65536]");
  HistogramCuts out;
  out.cuts.resize(X.cols());
  std::vector<double> column(X.rows());
  std::vector<double> unique;
  for (std::size_t f = 0; f < X.cols(); ++f) {
    for (std::size_t r = 0; r < X.rows(); ++r) column[r] = X(r, f);
    std::sort(column.begin(), column.end());
    unique.assign(column.begin(), column.end());
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
    auto& cuts = out.cuts[f];
    if (unique.size() <= static_cast<std::size_t>(n_bins)) {
      for (std::size_t i = 0; i + 1 < unique.size(); ++i) cuts.push_back(split_midpoint(unique[i], unique[i + 1]));
      continue;
    }
    // Quantile boundaries: the value at rank j*n/n_bins closes bin j-1.
    const std::size_t n = column.size();
    for (int j = 1; j < n_bins; ++j) {
      const double v = column[static_cast<std::size_t>(j) * n / static_cast<std::size_t>(n_bins)];
      const auto next = std::upper_bound(unique.begin(), unique.end(), v);
      if (next == unique.end()) break;
      const double cut = split_midpoint(v, *next);
      if (cuts.empty() || cut > cuts.back()) cuts.push_back(cut);
    }
  }
  return out;
}

GradientPair logistic_gradient(std::uint8_t y, double margin, double weight) {
  const double p = sigmoid(margin);
  return {weight * (p - static_cast<double>(y)), weight * p * (1.0 - p)};
}

double logloss(std::span<const std::uint8_t> y, std::span<const double> p) {
  if (y.size() != p.size()) invalid_input("logloss: size mismatch");
  if (y.empty()) invalid_input("logloss: empty input");
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double q = std::clamp(p[i], kProbClamp, 1.0 - kProbClamp);
    total -= y[i] ? std::log(q) : std::log(1.0 - q);
  }
  return total / static_cast<double>(y.size());
}

GbtModel fit_gbt(const Matrix& X_train, std::span<const std::uint8_t> y_train, const Matrix& X_val,
                 std::span<const std::uint8_t> y_val, const GbtParams& params) {
  if (X_train.empty()) invalid_input("empty training matrix");
  if (y_train.size() != X_train.rows()) invalid_input("label count does not match row count");
  if (X_val.empty() || y_val.empty()) invalid_input("empty validation set");
  if (y_val.size() != X_val.rows()) invalid_input("validation label count does not match row count");
  if (X_val.cols() != X_train.cols()) invalid_input("validation feature arity mismatch");
  if (params.max_depth < 1) invalid_input("max_depth must be at least 1");
  if (!(params.subsample > 0.0 && params.subsample <= 1.0)) invalid_input("subsample must be in (0, 1]");
  if (!(params.colsample_bytree > 0.0 && params.colsample_bytree <= 1.0)) {
    invalid_input("colsample_bytree must be in (0, 1]");
  }
  std::size_t n_pos = 0;
  for (std::uint8_t v : y_train) {
    if (v > 1) invalid_input("labels must be 0 or 1");
    n_pos += v;
  }
  const std::size_t n = X_train.rows();
  const std::size_t d = X_train.cols();
  if (n_pos == 0 || n_pos == n) degenerate("degenerate labels: both classes are required");

  GbtModel model;
  model.params = params;
  model.n_features = d;
  model.scale_pos_weight =
      params.scale_pos_weight.value_or(static_cast<double>(n - n_pos) / static_cast<double>(n_pos));

  const HistogramCuts cuts = build_cuts(X_train, params.n_bins);
  std::size_t max_bins = 1;
  for (std::size_t f = 0; f < d; ++f) max_bins = std::max(max_bins, cuts.bin_count(f));
  const BinnedMatrix train_bins = bin_matrix(X_train, cuts, params.n_jobs);
  const BinnedMatrix val_bins = bin_matrix(X_val, cuts, params.n_jobs);

  std::vector<double> margin(n, 0.0);
  std::vector<double> val_margin(X_val.rows(), 0.0);
  std::vector<GradientPair> gpair(n);
  std::vector<std::uint32_t> rows;
  rows.reserve(n);
  const auto n_cols_sampled = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(params.colsample_bytree * static_cast<double>(d))));

  std::vector<double> gain(d, 0.0);
  std::vector<std::vector<double>> gain_per_tree;
  double best_loss = std::numeric_limits<double>::infinity();

  BoostTreeGrower grower(train_bins, cuts, params, max_bins);
  for (int round = 0; round < params.num_boost_round; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      GradientPair g = logistic_gradient(y_train[i], margin[i], y_train[i] ? model.scale_pos_weight : 1.0);
      g.hess = std::max(g.hess, kMinHessian);
      gpair[i] = g;
    }

    Rng rng(derive_seed(params.seed, static_cast<std::uint64_t>(round) + 1));
    rows.clear();
    if (params.subsample >= 1.0) {
      for (std::size_t i = 0; i < n; ++i) rows.push_back(static_cast<std::uint32_t>(i));
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        if (uniform01(rng) < params.subsample) rows.push_back(static_cast<std::uint32_t>(i));
      }
    }
    std::vector<std::size_t> features;
    if (n_cols_sampled >= d) {
      features.resize(d);
      std::iota(features.begin(), features.end(), std::size_t{0});
    } else {
      features = sample_without_replacement(d, n_cols_sampled, rng);
    }

    TreeBuild built = grower.grow(gpair, rows, features);
    for (std::size_t i = 0; i < n; ++i) margin[i] += params.eta * tree_output_binned(built, train_bins, i);
    for (std::size_t i = 0; i < X_val.rows(); ++i) {
      val_margin[i] += params.eta * tree_output_binned(built, val_bins, i);
    }
    model.trees.push_back(std::move(built.tree));
    gain_per_tree.push_back(std::move(built.gain_per_feature));

    model.training_objective.push_back(weighted_logloss(y_train, margin, model.scale_pos_weight));
    const double val_loss = margin_logloss(y_val, val_margin);
    model.validation_logloss.push_back(val_loss);
    if (val_loss < best_loss) {
      best_loss = val_loss;
      model.best_iteration = round;
    } else if (round - model.best_iteration >= params.early_stopping_rounds) {
      break;
    }
  }

  for (std::size_t t = 0; t < model.best_tree_count(); ++t) {
    for (std::size_t f = 0; f < d; ++f) gain[f] += gain_per_tree[t][f];
  }
  const double total = std::accumulate(gain.begin(), gain.end(), 0.0);
  model.feature_importance.assign(d, 0.0);
  if (total > 0.0) {
    for (std::size_t f = 0; f < d; ++f) model.feature_importance[f] = gain[f] / total;
  }
  return model;
}

std::vector<double> predict_proba(const GbtModel& model, const Matrix& X, std::optional<std::size_t> tree_count) {
  if (X.cols() != model.n_features) {
    invalid_input("feature arity mismatch: model has " + std::to_string(model.n_features) + ", input has " +
                  std::to_string(X.cols()));
  }
  const std::size_t use = std::min(tree_count.value_or(model.best_tree_count()), model.trees.size());
  std::vector<double> out(X.rows());
  parallel_for(X.rows(), model.params.n_jobs, [&](std::size_t r) {
    const auto row = X.row(r);
    double m = 0.0;
    for (std::size_t t = 0; t < use; ++t) m += model.params.eta * model.trees[t].predict(row);
    out[r] = sigmoid(m);
  });
  return out;
}

}  // namespace mlsq
