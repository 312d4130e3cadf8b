#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace mlsq {

/// A point in metric coordinates (meters).
struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  bool is_finite() const noexcept {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
  }

  friend bool operator==(const Point3&, const Point3&) = default;
};

inline double distance(const Point3& a, const Point3& b) noexcept {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double dz = a.z - b.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

/// Ordered point collection. The position of a point is its identity: every
/// per-point table in the pipeline is indexed by it.
struct PointCloud {
  std::vector<Point3> points;

  PointCloud() = default;
  explicit PointCloud(std::vector<Point3> pts) : points(std::move(pts)) {}

  std::size_t size() const noexcept { return points.size(); }
  bool empty() const noexcept { return points.empty(); }
  const Point3& operator[](std::size_t i) const { return points[i]; }
  Point3& operator[](std::size_t i) { return points[i]; }
  std::span<const Point3> view() const noexcept { return points; }

  friend bool operator==(const PointCloud&, const PointCloud&) = default;
};

/// Throws InvalidInput naming the first point with a NaN/Inf coordinate.
void require_finite(const PointCloud& cloud);

struct Bounds3 {
  Point3 min;
  Point3 max;
};

/// Axis-aligned bounding box. Throws on an empty cloud.
Bounds3 bounds(const PointCloud& cloud);

/// Selects points by index, preserving the order of `indices`.
PointCloud subset(const PointCloud& cloud, std::span<const std::size_t> indices);

}  // namespace mlsq
