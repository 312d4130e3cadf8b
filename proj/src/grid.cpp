#include "mlsq/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mlsq/error.hpp"
#include "mlsq/random.hpp"

namespace mlsq {

std::vector<std::int64_t> GridPartition::non_empty_cells() const {
  std::vector<std::int64_t> ids;
  ids.reserve(cells_.size());
  for (const CellId& c : cells_) ids.push_back(linear_id(c));
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

GridPartition grid_partition(const PointCloud& cloud, double cell_size) {
  if (!(cell_size > 0.0) || !std::isfinite(cell_size)) {
    invalid_input("cell size must be positive");
  }
  require_finite(cloud);
  const Bounds3 box = bounds(cloud);

  GridPartition grid;
  grid.cell_size_ = cell_size;
  grid.origin_x_ = box.min.x;
  grid.origin_y_ = box.min.y;
  grid.cells_.reserve(cloud.size());
  std::int64_t max_row = 0;
  std::int64_t max_col = 0;
  for (const Point3& p : cloud.points) {
    const auto row = static_cast<std::int64_t>(std::floor((p.y - grid.origin_y_) / cell_size));
    const auto col = static_cast<std::int64_t>(std::floor((p.x - grid.origin_x_) / cell_size));
    grid.cells_.push_back({row, col});
    max_row = std::max(max_row, row);
    max_col = std::max(max_col, col);
  }
  grid.n_rows_ = max_row + 1;
  grid.n_cols_ = max_col + 1;
  return grid;
}

int FoldAssignment::fold_of(std::int64_t linear_cell) const {
  const auto it = fold_of_cell_.find(linear_cell);
  if (it == fold_of_cell_.end()) {
    invalid_input("cell " + std::to_string(linear_cell) + " has no fold");
  }
  return it->second;
}

std::vector<int> FoldAssignment::fold_of_points(const GridPartition& partition) const {
  std::vector<int> folds(partition.size());
  for (std::size_t i = 0; i < partition.size(); ++i) {
    folds[i] = fold_of(partition.linear_cell_of_point(i));
  }
  return folds;
}

std::vector<std::size_t> FoldAssignment::cells_per_fold() const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(n_folds_), 0);
  for (const auto& [cell, fold] : fold_of_cell_) ++counts[static_cast<std::size_t>(fold)];
  return counts;
}

FoldAssignment assign_folds(std::span<const std::int64_t> cells, int n_folds, std::uint64_t seed) {
  if (n_folds < 2) invalid_input("at least 2 folds are required");
  std::vector<std::int64_t> order(cells.begin(), cells.end());
  std::sort(order.begin(), order.end());
  order.erase(std::unique(order.begin(), order.end()), order.end());
  if (order.size() < static_cast<std::size_t>(n_folds)) {
    degenerate("too few cells: " + std::to_string(order.size()) + " non-empty cells for " +
               std::to_string(n_folds) + " folds");
  }
  Rng rng(seed);
  shuffle(order, rng);

  FoldAssignment out;
  out.n_folds_ = n_folds;
  out.seed_ = seed;
  for (std::size_t i = 0; i < order.size(); ++i) {
    out.fold_of_cell_[order[i]] = static_cast<int>(i % static_cast<std::size_t>(n_folds));
  }
  return out;
}

FoldAssignment assign_folds(const GridPartition& partition, int n_folds, std::uint64_t seed) {
  const auto cells = partition.non_empty_cells();
  return assign_folds(cells, n_folds, seed);
}

}  // namespace mlsq
