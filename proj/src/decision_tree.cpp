#include "mlsq/decision_tree.hpp"

#include <algorithm>
#include <utility>

namespace mlsq {

std::size_t DecisionTree::leaf_of(std::span<const double> row) const {
  std::size_t id = 0;
  while (!nodes[id].is_leaf()) {
    const TreeNode& n = nodes[id];
    id = static_cast<std::size_t>(row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
  return id;
}

std::size_t DecisionTree::depth() const {
  if (nodes.empty()) return 0;
  std::size_t best = 0;
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
  while (!stack.empty()) {
    const auto [id, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    if (!nodes[id].is_leaf()) {
      stack.emplace_back(static_cast<std::size_t>(nodes[id].left), d + 1);
      stack.emplace_back(static_cast<std::size_t>(nodes[id].right), d + 1);
    }
  }
  return best;
}

std::size_t DecisionTree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

}  // namespace mlsq
