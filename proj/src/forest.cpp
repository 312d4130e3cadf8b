#include "mlsq/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mlsq/error.hpp"
#include "mlsq/log.hpp"
#include "mlsq/parallel.hpp"
#include "mlsq/random.hpp"

namespace mlsq {
namespace {

constexpr std::uint64_t kPreSubsampleSalt = 0x70726573ULL;

// Grows one tree over presorted row segments. Every feature keeps its own
// copy of the node's rows in ascending feature order; a split stably
// partitions all copies, so no node ever re-sorts.
class TreeGrower {
 public:
  TreeGrower(const Matrix& X, std::span<const std::uint8_t> y, std::span<const double> class_weight,
             const ForestParams& params)
      : X_(X), y_(y), class_weight_(class_weight), params_(params), n_features_(X.cols()) {}

  DecisionTree grow(const std::vector<std::vector<std::uint32_t>>& presorted,
                    std::span<const std::uint8_t> in_sample, std::size_t sample_size,
                    std::vector<double>& importance) {
    m_ = sample_size;
    segments_.assign(n_features_ * m_, 0);
    for (std::size_t f = 0; f < n_features_; ++f) {
      std::size_t k = 0;
      std::uint32_t* dst = segments_.data() + f * m_;
      for (std::uint32_t row : presorted[f]) {
        if (in_sample[row]) dst[k++] = row;
      }
    }
    buffer_.resize(m_);
    goes_left_.assign(X_.rows(), 0);
    importance_.assign(n_features_, 0.0);
    tree_ = DecisionTree{};
    build(0, m_, 0);
    importance = importance_;
    return std::move(tree_);
  }

 private:
  struct Split {
    bool found = false;
    std::size_t feature = 0;
    double threshold = 0.0;
    double score = 0.0;
  };

  std::int32_t build(std::size_t begin, std::size_t end, int depth) {
    const auto id = static_cast<std::int32_t>(tree_.nodes.size());
    tree_.nodes.emplace_back();

    double w0 = 0.0, w1 = 0.0;
    const std::uint32_t* seg0 = segments_.data();
    for (std::size_t i = begin; i < end; ++i) {
      const std::uint32_t row = seg0[i];
      (y_[row] ? w1 : w0) += class_weight_[y_[row]];
    }
    const double w = w0 + w1;
    const std::size_t count = end - begin;
    tree_.nodes[static_cast<std::size_t>(id)].value = w > 0.0 ? w1 / w : 0.0;

    const bool depth_limited = params_.max_depth > 0 && depth >= params_.max_depth;
    const bool pure = w0 == 0.0 || w1 == 0.0;
    const auto min_leaf = static_cast<std::size_t>(std::max(1, params_.min_samples_leaf));
    if (depth_limited || pure || count < 2 * min_leaf) return id;

    const Split split = best_split(begin, end, w0, w1, min_leaf);
    if (!split.found) return id;

    // Importance: weighted impurity decrease, w*gini(parent) - sum w*gini(child).
    const double parent_score = (w0 * w0 + w1 * w1) / w;
    importance_[split.feature] += split.score - parent_score;

    const std::uint32_t* best_seg = segments_.data() + split.feature * m_;
    std::size_t n_left = 0;
    for (std::size_t i = begin; i < end; ++i) {
      const std::uint32_t row = best_seg[i];
      const bool left = X_(row, split.feature) <= split.threshold;
      goes_left_[row] = left ? 1 : 0;
      n_left += left ? 1 : 0;
    }
    for (std::size_t f = 0; f < n_features_; ++f) {
      std::uint32_t* seg = segments_.data() + f * m_;
      std::size_t l = begin;
      std::size_t r = 0;
      for (std::size_t i = begin; i < end; ++i) {
        const std::uint32_t row = seg[i];
        if (goes_left_[row]) {
          seg[l++] = row;
        } else {
          buffer_[r++] = row;
        }
      }
      std::copy(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(r), seg + l);
    }

    const std::int32_t left = build(begin, begin + n_left, depth + 1);
    const std::int32_t right = build(begin + n_left, end, depth + 1);
    TreeNode& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = static_cast<std::int32_t>(split.feature);
    node.threshold = split.threshold;
    node.left = left;
    node.right = right;
    return id;
  }

  // Maximizes sum over children of (w0^2 + w1^2) / w, which minimizes the
  // weighted Gini impurity. Ties keep the lowest feature, then the lowest
  // threshold.
  Split best_split(std::size_t begin, std::size_t end, double w0, double w1, std::size_t min_leaf) const {
    Split best;
    const std::size_t count = end - begin;
    for (std::size_t f = 0; f < n_features_; ++f) {
      const std::uint32_t* seg = segments_.data() + f * m_;
      double l0 = 0.0, l1 = 0.0;
      for (std::size_t i = begin; i + 1 < end; ++i) {
        const std::uint32_t row = seg[i];
        (y_[row] ? l1 : l0) += class_weight_[y_[row]];
        const std::size_t n_left = i + 1 - begin;
        if (n_left < min_leaf) continue;
        if (count - n_left < min_leaf) break;
        const double x = X_(row, f);
        const double x_next = X_(seg[i + 1], f);
        if (!(x < x_next)) continue;
        const double wl = l0 + l1;
        const double r0 = w0 - l0, r1 = w1 - l1;
        const double wr = r0 + r1;
        if (!(wl > 0.0) || !(wr > 0.0)) continue;
        const double score = (l0 * l0 + l1 * l1) / wl + (r0 * r0 + r1 * r1) / wr;
        if (!best.found || score > best.score) {
          best.found = true;
          best.feature = f;
          best.threshold = split_midpoint(x, x_next);
          best.score = score;
        }
      }
    }
    return best;
  }

  const Matrix& X_;
  std::span<const std::uint8_t> y_;
  std::span<const double> class_weight_;
  const ForestParams& params_;
  std::size_t n_features_;
  std::size_t m_ = 0;
  std::vector<std::uint32_t> segments_;
  std::vector<std::uint32_t> buffer_;
  std::vector<std::uint8_t> goes_left_;
  std::vector<double> importance_;
  DecisionTree tree_;
};

std::array<std::size_t, 2> count_classes(std::span<const std::uint8_t> y) {
  std::array<std::size_t, 2> counts{};
  for (std::uint8_t v : y) {
    if (v > 1) invalid_input("labels must be 0 or 1");
    ++counts[v];
  }
  return counts;
}

}  // namespace

ForestModel fit_forest(const Matrix& X_in, std::span<const std::uint8_t> y_in, const ForestParams& params) {
  if (X_in.empty()) invalid_input("empty training matrix");
  if (y_in.size() != X_in.rows()) invalid_input("label count does not match row count");
  if (params.n_estimators < 1) invalid_input("n_estimators must be at least 1");
  if (!(params.max_samples > 0.0 && params.max_samples <= 1.0)) invalid_input("max_samples must be in (0, 1]");
  {
    const auto counts = count_classes(y_in);
    if (counts[0] == 0 || counts[1] == 0) degenerate("degenerate labels: both classes are required");
  }

  // Optional one-off subsample of very large training sets.
  Matrix X_sub;
  std::vector<std::uint8_t> y_sub;
  const Matrix* X = &X_in;
  std::span<const std::uint8_t> y = y_in;
  if (X_in.rows() > params.subsample_threshold) {
    Rng rng(derive_seed(params.seed, kPreSubsampleSalt));
    const auto keep = static_cast<std::size_t>(std::floor(params.subsample_fraction * static_cast<double>(X_in.rows())));
    const auto rows = sample_without_replacement(X_in.rows(), keep, rng);
    X_sub = X_in.select_rows(rows);
    y_sub.reserve(rows.size());
    for (std::size_t r : rows) y_sub.push_back(y_in[r]);
    X = &X_sub;
    y = y_sub;
    log_info("random forest: subsampled " + std::to_string(X_in.rows()) + " training rows to " +
             std::to_string(rows.size()));
  }

  const std::size_t n = X->rows();
  const std::size_t d = X->cols();
  const auto counts = count_classes(y);
  if (counts[0] == 0 || counts[1] == 0) degenerate("degenerate labels after subsampling");

  std::array<double, 2> class_weight{1.0, 1.0};
  if (params.balanced_class_weight) {
    for (int c = 0; c < 2; ++c) {
      class_weight[static_cast<std::size_t>(c)] =
          static_cast<double>(n) / (2.0 * static_cast<double>(counts[static_cast<std::size_t>(c)]));
    }
  }

  std::vector<std::vector<std::uint32_t>> presorted(d);
  for (std::size_t f = 0; f < d; ++f) {
    auto& order = presorted[f];
    order.resize(n);
    std::iota(order.begin(), order.end(), std::uint32_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return (*X)(a, f) < (*X)(b, f); });
  }

  const auto sample_size = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(params.max_samples * static_cast<double>(n))));

  ForestModel model;
  model.params = params;
  model.n_features = d;
  model.n_rows = n;
  model.class_counts = counts;
  model.trees.resize(static_cast<std::size_t>(params.n_estimators));
  std::vector<std::vector<double>> tree_importance(model.trees.size());

  parallel_for(model.trees.size(), params.n_jobs, [&](std::size_t t) {
    Rng rng(derive_seed(params.seed, t + 1));
    std::vector<std::uint8_t> in_sample(n, 0);
    if (sample_size == n) {
      std::fill(in_sample.begin(), in_sample.end(), 1);
    } else {
      for (std::size_t r : sample_without_replacement(n, sample_size, rng)) in_sample[r] = 1;
    }
    TreeGrower grower(*X, y, class_weight, params);
    model.trees[t] = grower.grow(presorted, in_sample, sample_size, tree_importance[t]);
  });

  model.feature_importance.assign(d, 0.0);
  for (const auto& imp : tree_importance) {
    const double total = std::accumulate(imp.begin(), imp.end(), 0.0);
    if (!(total > 0.0)) continue;
    for (std::size_t f = 0; f < d; ++f) model.feature_importance[f] += imp[f] / total;
  }
  const double total = std::accumulate(model.feature_importance.begin(), model.feature_importance.end(), 0.0);
  if (total > 0.0) {
    for (double& v : model.feature_importance) v /= total;
  }
  return model;
}

std::vector<double> predict_proba(const ForestModel& model, const Matrix& X) {
  if (X.cols() != model.n_features) {
    invalid_input("feature arity mismatch: model has " + std::to_string(model.n_features) + ", input has " +
                  std::to_string(X.cols()));
  }
  std::vector<double> out(X.rows(), 0.0);
  if (model.trees.empty()) return out;
  parallel_for(X.rows(), model.params.n_jobs, [&](std::size_t r) {
    const auto row = X.row(r);
    double s = 0.0;
    for (const DecisionTree& tree : model.trees) s += tree.predict(row);
    out[r] = s / static_cast<double>(model.trees.size());
  });
  return out;
}

}  // namespace mlsq
