#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "mlsq/error.hpp"
#include "mlsq/geometry.hpp"

namespace mlsq {

struct Neighbor {
  std::size_t index = 0;
  double distance = 0.0;  // meters

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Exact kd-tree over Dim-dimensional coordinates.
///
/// Results are totally ordered by (squared distance, point index), so equal
/// distances resolve to the smaller index. The tree is immutable after
/// construction and may be queried concurrently.
template <int Dim>
class KdTree {
 public:
  using Coord = std::array<double, Dim>;

  KdTree(std::vector<Coord> coords, std::size_t leaf_size) : coords_(std::move(coords)) {
    if (coords_.empty()) invalid_input("empty cloud");
    if (leaf_size < 1) invalid_input("leaf size must be at least 1");
    for (std::size_t i = 0; i < coords_.size(); ++i) {
      for (int d = 0; d < Dim; ++d) {
        if (!std::isfinite(coords_[i][d])) {
          invalid_input("non-finite coordinate at point " + std::to_string(i));
        }
      }
    }
    leaf_size_ = leaf_size;
    order_.resize(coords_.size());
    std::iota(order_.begin(), order_.end(), std::uint32_t{0});
    nodes_.reserve(2 * coords_.size() / leaf_size_ + 1);
    build(0, static_cast<std::uint32_t>(coords_.size()));
  }

  std::size_t size() const noexcept { return coords_.size(); }
  std::size_t leaf_size() const noexcept { return leaf_size_; }
  const Coord& coord(std::size_t i) const { return coords_[i]; }

  /// Point indices grouped by leaf; each input point appears exactly once.
  std::vector<std::vector<std::size_t>> leaves() const {
    std::vector<std::vector<std::size_t>> out;
    for (const auto& node : nodes_) {
      if (node.left >= 0) continue;
      out.emplace_back(order_.begin() + node.begin, order_.begin() + node.end);
    }
    return out;
  }

  /// k nearest neighbors of `query`, ascending. `out` is overwritten.
  void knn(const Coord& query, std::size_t k, std::vector<Neighbor>& out) const {
    if (k < 1) invalid_input("k must be at least 1");
    if (k > coords_.size()) invalid_input("k exceeds cloud size");
    std::vector<Candidate> heap;
    heap.reserve(k + 1);
    search(0, query, k, heap);
    std::sort_heap(heap.begin(), heap.end());
    out.resize(heap.size());
    for (std::size_t i = 0; i < heap.size(); ++i) {
      out[i] = Neighbor{heap[i].index, std::sqrt(heap[i].dist2)};
    }
  }

  std::vector<Neighbor> knn(const Coord& query, std::size_t k) const {
    std::vector<Neighbor> out;
    knn(query, k, out);
    return out;
  }

  Neighbor nearest(const Coord& query) const {
    std::vector<Candidate> heap;
    heap.reserve(2);
    search(0, query, 1, heap);
    return Neighbor{heap.front().index, std::sqrt(heap.front().dist2)};
  }

  /// Squared distance in the same arithmetic order the search uses.
  static double squared_distance(const Coord& a, const Coord& b) noexcept {
    double s = 0.0;
    for (int d = 0; d < Dim; ++d) {
      const double diff = a[d] - b[d];
      s += diff * diff;
    }
    return s;
  }

 private:
  struct Node {
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    std::int32_t left = -1;  // -1 marks a leaf
    std::int32_t right = -1;
    Coord lo{};
    Coord hi{};
  };

  struct Candidate {
    double dist2;
    std::size_t index;
    bool operator<(const Candidate& o) const noexcept {
      return dist2 < o.dist2 || (dist2 == o.dist2 && index < o.index);
    }
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end) {
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.emplace_back();
    Node node;
    node.begin = begin;
    node.end = end;
    node.lo.fill(std::numeric_limits<double>::infinity());
    node.hi.fill(-std::numeric_limits<double>::infinity());
    for (std::uint32_t i = begin; i < end; ++i) {
      const Coord& c = coords_[order_[i]];
      for (int d = 0; d < Dim; ++d) {
        node.lo[d] = std::min(node.lo[d], c[d]);
        node.hi[d] = std::max(node.hi[d], c[d]);
      }
    }
    if (end - begin > leaf_size_) {
      int axis = 0;
      for (int d = 1; d < Dim; ++d) {
        if (node.hi[d] - node.lo[d] > node.hi[axis] - node.lo[axis]) axis = d;
      }
      const std::uint32_t mid = begin + (end - begin) / 2;
      std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                       [&](std::uint32_t a, std::uint32_t b) {
                         const double ca = coords_[a][axis];
                         const double cb = coords_[b][axis];
                         return ca < cb || (ca == cb && a < b);
                       });
      node.left = build(begin, mid);
      node.right = build(mid, end);
    }
    nodes_[static_cast<std::size_t>(id)] = node;
    return id;
  }

  static double box_distance2(const Node& node, const Coord& q) noexcept {
    double s = 0.0;
    for (int d = 0; d < Dim; ++d) {
      double diff = 0.0;
      if (q[d] < node.lo[d]) {
        diff = node.lo[d] - q[d];
      } else if (q[d] > node.hi[d]) {
        diff = q[d] - node.hi[d];
      }
      s += diff * diff;
    }
    return s;
  }

  void search(std::int32_t id, const Coord& q, std::size_t k, std::vector<Candidate>& heap) const {
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    if (node.left < 0) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const std::uint32_t p = order_[i];
        const Candidate c{squared_distance(q, coords_[p]), p};
        if (heap.size() < k) {
          heap.push_back(c);
          std::push_heap(heap.begin(), heap.end());
        } else if (c < heap.front()) {
          std::pop_heap(heap.begin(), heap.end());
          heap.back() = c;
          std::push_heap(heap.begin(), heap.end());
        }
      }
      return;
    }
    const Node& left = nodes_[static_cast<std::size_t>(node.left)];
    const Node& right = nodes_[static_cast<std::size_t>(node.right)];
    const double dl = box_distance2(left, q);
    const double dr = box_distance2(right, q);
    const bool left_first = dl <= dr;
    const std::int32_t first = left_first ? node.left : node.right;
    const std::int32_t second = left_first ? node.right : node.left;
    const double d_first = left_first ? dl : dr;
    const double d_second = left_first ? dr : dl;
    // A subtree at exactly the current worst distance may still hold a
    // smaller index, so only strictly farther boxes are pruned.
    if (heap.size() < k || d_first <= heap.front().dist2) search(first, q, k, heap);
    if (heap.size() < k || d_second <= heap.front().dist2) search(second, q, k, heap);
  }

  std::vector<Coord> coords_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
  std::size_t leaf_size_ = 1;
};

using SpatialIndex = KdTree<3>;
using PlanarIndex = KdTree<2>;

inline SpatialIndex::Coord to_coord(const Point3& p) noexcept { return {p.x, p.y, p.z}; }
inline PlanarIndex::Coord to_coord_2d(const Point3& p) noexcept { return {p.x, p.y}; }

/// 3D index over a cloud. Throws "empty cloud" or on non-finite coordinates.
SpatialIndex build_index(const PointCloud& cloud, std::size_t leaf_size = 16);

/// XY-only index over a cloud, used by the 2D features.
PlanarIndex build_index_2d(const PointCloud& cloud, std::size_t leaf_size = 16);

inline std::vector<Neighbor> knn(const SpatialIndex& index, const Point3& query, std::size_t k) {
  return index.knn(to_coord(query), k);
}

inline Neighbor nearest(const SpatialIndex& index, const Point3& query) {
  return index.nearest(to_coord(query));
}

}  // namespace mlsq
