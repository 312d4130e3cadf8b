#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace mlsq {

/// Binary tree node. Internal nodes send `value <= threshold` left. Leaves
/// carry the prediction: the class-1 probability in a forest, the raw leaf
/// weight in a boosted ensemble.
struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  double value = 0.0;

  bool is_leaf() const noexcept { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  std::size_t leaf_of(std::span<const double> row) const;
  double predict(std::span<const double> row) const { return nodes[leaf_of(row)].value; }
  std::size_t depth() const;
  std::size_t leaf_count() const;

  friend bool operator==(const DecisionTree&, const DecisionTree&) = default;
};

/// Midpoint between two adjacent distinct values that still separates them
/// (falls back to `lo` when the midpoint rounds up to `hi`).
inline double split_midpoint(double lo, double hi) noexcept {
  const double mid = lo + (hi - lo) * 0.5;
  return (mid < hi) ? mid : lo;
}

}  // namespace mlsq
