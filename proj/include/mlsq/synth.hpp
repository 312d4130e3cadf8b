#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "mlsq/geometry.hpp"

namespace mlsq {

/// Axis-aligned wall: a thin upright slab along one axis, from (x0, y0) to
/// (x1, y1) with x0 == x1 or y0 == y1.
struct WallSegment {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;
  double height = 3.0;
  double thickness = 0.2;
};

struct SceneSpec {
  double floor_x = 30.0;  // meters
  double floor_y = 20.0;
  std::vector<WallSegment> walls;
  int box_count = 8;
  double box_size_min = 0.8;  // footprint edge length range
  double box_size_max = 2.0;
  double box_height_min = 0.6;
  double box_height_max = 2.0;
  double clutter_density = 0.02;  // small objects per square meter of floor
  double clutter_size_min = 0.15;
  double clutter_size_max = 0.4;
  double reference_density = 400.0;  // points per square meter of surface
  std::uint64_t seed = 1;

  /// The default hall: 30 x 20 m, four interior walls, eight boxes.
  static SceneSpec hall();
};

enum class SurfaceKind : std::uint8_t { Floor, Wall, Box, Clutter };

std::string_view surface_name(SurfaceKind kind) noexcept;

/// Dense, noise-free sampling of the scene with per-point provenance.
struct ReferenceScene {
  PointCloud cloud;
  std::vector<Point3> normal;           // unit outward surface normal
  std::vector<SurfaceKind> kind;
  std::vector<double> edge_distance;    // to the nearest edge or junction of the surface, meters
  std::vector<std::uint32_t> surface;   // surface id, one per sampled rectangle
  std::vector<double> surface_area;     // indexed by surface id
};

/// Deterministic given spec.seed. Throws InvalidInput for non-positive
/// extents or densities, non-axis-aligned walls, or boxes that cannot be
/// placed without overlap.
ReferenceScene generate_reference(const SceneSpec& spec);

/// Scanner-like degradation of the reference. A point survives with a
/// probability that decays with its distance from the trajectory line
/// y = trajectory_y, and is then displaced along its normal by a smooth drift
/// plus Gaussian noise with standard deviation
///   sigma0 * (1 + height_gain * z / height_scale)
///          * (1 + edge_gain * exp(-edge_distance / edge_radius))
///          * (1 + sparse_gain * (1 - keep) / (1 - keep_min)).
struct ErrorModel {
  double sigma0 = 0.006;
  double height_gain = 2.0;
  double height_scale = 3.0;
  double edge_gain = 2.0;
  double edge_radius = 0.3;
  double sparse_gain = 2.5;
  double drift_amplitude = 0.003;
  double drift_wavelength = 12.0;
  double trajectory_y = 10.0;
  double keep_max = 0.95;
  double keep_min = 0.25;
  double keep_decay = 6.0;  // meters

  /// No thinning and no displacement: the scan reproduces the reference.
  static ErrorModel none();
};

struct MlsScene {
  PointCloud cloud;
  std::vector<std::size_t> source;  // index of the originating reference point
  std::vector<double> true_error;   // |displacement| in meters
  std::vector<SurfaceKind> kind;
};

MlsScene generate_mls(const ReferenceScene& reference, const ErrorModel& model, std::uint64_t seed);

/// point_index,injected_error,surface
void write_truth_csv(const MlsScene& scene, const std::filesystem::path& path);

}  // namespace mlsq
