#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "mlsq/geometry.hpp"

namespace mlsq {

struct CellId {
  std::int64_t row = 0;
  std::int64_t col = 0;

  friend auto operator<=>(const CellId&, const CellId&) = default;
};

/// Non-overlapping square XY tiling anchored at the cloud's bounding-box
/// minimum. Cell of a point: (floor((y - y0) / size), floor((x - x0) / size)).
class GridPartition {
 public:
  double cell_size() const noexcept { return cell_size_; }
  double origin_x() const noexcept { return origin_x_; }
  double origin_y() const noexcept { return origin_y_; }
  std::int64_t n_rows() const noexcept { return n_rows_; }
  std::int64_t n_cols() const noexcept { return n_cols_; }
  std::size_t size() const noexcept { return cells_.size(); }

  CellId cell_of_point(std::size_t i) const { return cells_[i]; }

  /// Row-major linear id, stable for a given partition.
  std::int64_t linear_id(const CellId& c) const noexcept { return c.row * n_cols_ + c.col; }
  std::int64_t linear_cell_of_point(std::size_t i) const { return linear_id(cells_[i]); }

  /// Sorted, de-duplicated linear ids of the occupied cells.
  std::vector<std::int64_t> non_empty_cells() const;

  friend GridPartition grid_partition(const PointCloud& cloud, double cell_size);

 private:
  double cell_size_ = 1.0;
  double origin_x_ = 0.0;
  double origin_y_ = 0.0;
  std::int64_t n_rows_ = 0;
  std::int64_t n_cols_ = 0;
  std::vector<CellId> cells_;
};

GridPartition grid_partition(const PointCloud& cloud, double cell_size);

/// Cell-to-fold map. Folds are only ever assigned per cell; there is no way
/// to move an individual point between folds.
class FoldAssignment {
 public:
  int n_folds() const noexcept { return n_folds_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const std::map<std::int64_t, int>& fold_of_cell() const noexcept { return fold_of_cell_; }

  /// Throws InvalidInput for a cell that was not part of the assignment.
  int fold_of(std::int64_t linear_cell) const;

  /// Fold index of every point of `partition`.
  std::vector<int> fold_of_points(const GridPartition& partition) const;

  /// Number of cells dealt to each fold.
  std::vector<std::size_t> cells_per_fold() const;

  friend FoldAssignment assign_folds(std::span<const std::int64_t> cells, int n_folds,
                                     std::uint64_t seed);

 private:
  int n_folds_ = 0;
  std::uint64_t seed_ = 0;
  std::map<std::int64_t, int> fold_of_cell_;
};

/// Shuffles the distinct cell ids with `seed` and deals them round-robin.
/// Throws Degenerate "too few cells" when there are fewer cells than folds.
FoldAssignment assign_folds(std::span<const std::int64_t> cells, int n_folds, std::uint64_t seed);

FoldAssignment assign_folds(const GridPartition& partition, int n_folds, std::uint64_t seed);

}  // namespace mlsq
