#include "mlsq/geometry.hpp"

#include <algorithm>
#include <string>

#include "mlsq/error.hpp"
#include "mlsq/kdtree.hpp"
#include "mlsq/random.hpp"

namespace mlsq {

void require_finite(const PointCloud& cloud) {
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (!cloud[i].is_finite()) {
      invalid_input("non-finite coordinate at point " + std::to_string(i));
    }
  }
}

Bounds3 bounds(const PointCloud& cloud) {
  if (cloud.empty()) invalid_input("empty cloud");
  Bounds3 b{cloud[0], cloud[0]};
  for (const Point3& p : cloud.points) {
    b.min.x = std::min(b.min.x, p.x);
    b.min.y = std::min(b.min.y, p.y);
    b.min.z = std::min(b.min.z, p.z);
    b.max.x = std::max(b.max.x, p.x);
    b.max.y = std::max(b.max.y, p.y);
    b.max.z = std::max(b.max.z, p.z);
  }
  return b;
}

PointCloud subset(const PointCloud& cloud, std::span<const std::size_t> indices) {
  PointCloud out;
  out.points.reserve(indices.size());
  for (std::size_t i : indices) out.points.push_back(cloud.points.at(i));
  return out;
}

SpatialIndex build_index(const PointCloud& cloud, std::size_t leaf_size) {
  if (cloud.empty()) invalid_input("empty cloud");
  std::vector<SpatialIndex::Coord> coords;
  coords.reserve(cloud.size());
  for (const Point3& p : cloud.points) coords.push_back(to_coord(p));
  return SpatialIndex(std::move(coords), leaf_size);
}

PlanarIndex build_index_2d(const PointCloud& cloud, std::size_t leaf_size) {
  if (cloud.empty()) invalid_input("empty cloud");
  require_finite(cloud);
  std::vector<PlanarIndex::Coord> coords;
  coords.reserve(cloud.size());
  for (const Point3& p : cloud.points) coords.push_back(to_coord_2d(p));
  return PlanarIndex(std::move(coords), leaf_size);
}

std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t count, Rng& rng) {
  if (count > n) invalid_input("sample size exceeds population");
  // Partial Fisher-Yates over an index vector.
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = i + static_cast<std::size_t>(uniform_index(rng, n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace mlsq
