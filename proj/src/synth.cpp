#include "mlsq/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <string>

#include "mlsq/error.hpp"
#include "mlsq/random.hpp"

namespace mlsq {
namespace {

constexpr std::uint64_t kLayoutSalt = 0x6c61796fULL;
constexpr std::uint64_t kMlsSalt = 0x6d6c7321ULL;
constexpr int kPlacementAttempts = 2000;

// Solid standing on the floor: [x0, x1] x [y0, y1] x [0, height].
struct Block {
  double x0, y0, x1, y1, height;
  SurfaceKind kind;

  bool overlaps(const Block& o, double gap) const {
    return x0 < o.x1 + gap && o.x0 < x1 + gap && y0 < o.y1 + gap && o.y0 < y1 + gap;
  }
  bool contains_xy(double x, double y) const { return x > x0 && x < x1 && y > y0 && y < y1; }
  double distance_xy(double x, double y) const {
    const double dx = std::max({x0 - x, 0.0, x - x1});
    const double dy = std::max({y0 - y, 0.0, y - y1});
    return std::hypot(dx, dy);
  }
};

// Planar rectangle origin + a*u + b*v, a, b in [0, 1].
struct Face {
  Point3 origin, u, v, normal;
  SurfaceKind kind;

  double length_u() const { return std::sqrt(u.x * u.x + u.y * u.y + u.z * u.z); }
  double length_v() const { return std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z); }
  double area() const { return length_u() * length_v(); }
};

std::vector<Face> faces_of(const Block& b) {
  const double w = b.x1 - b.x0, d = b.y1 - b.y0, h = b.height;
  const SurfaceKind k = b.kind;
  return {
      {{b.x0, b.y0, 0}, {w, 0, 0}, {0, 0, h}, {0, -1, 0}, k},  // south
      {{b.x0, b.y1, 0}, {w, 0, 0}, {0, 0, h}, {0, 1, 0}, k},   // north
      {{b.x0, b.y0, 0}, {0, d, 0}, {0, 0, h}, {-1, 0, 0}, k},  // west
      {{b.x1, b.y0, 0}, {0, d, 0}, {0, 0, h}, {1, 0, 0}, k},   // east
      {{b.x0, b.y0, h}, {w, 0, 0}, {0, d, 0}, {0, 0, 1}, k},   // top
  };
}

Block wall_block(const WallSegment& w) {
  const double t = 0.5 * w.thickness;
  if (w.y0 == w.y1) {
    return {std::min(w.x0, w.x1), w.y0 - t, std::max(w.x0, w.x1), w.y0 + t, w.height, SurfaceKind::Wall};
  }
  return {w.x0 - t, std::min(w.y0, w.y1), w.x0 + t, std::max(w.y0, w.y1), w.height, SurfaceKind::Wall};
}

void validate(const SceneSpec& s) {
  if (!(s.floor_x > 0.0 && s.floor_y > 0.0)) invalid_input("scene extents must be positive");
  if (!(s.reference_density > 0.0)) invalid_input("reference density must be positive");
  if (s.box_count < 0 || !(s.clutter_density >= 0.0)) invalid_input("object counts must be non-negative");
  if (s.box_count > 0 && !(s.box_size_min > 0.0 && s.box_size_max >= s.box_size_min && s.box_height_min > 0.0 &&
                           s.box_height_max >= s.box_height_min)) {
    invalid_input("box size ranges must be positive and ordered");
  }
  if (s.clutter_density > 0.0 && !(s.clutter_size_min > 0.0 && s.clutter_size_max >= s.clutter_size_min)) {
    invalid_input("clutter size range must be positive and ordered");
  }
  for (const WallSegment& w : s.walls) {
    const bool along_x = w.y0 == w.y1 && w.x0 != w.x1;
    const bool along_y = w.x0 == w.x1 && w.y0 != w.y1;
    if (!along_x && !along_y) invalid_input("walls must be axis-aligned with non-zero length");
    if (!(w.height > 0.0 && w.thickness > 0.0)) invalid_input("wall height and thickness must be positive");
  }
}

Block place(Rng& rng, const SceneSpec& s, const std::vector<Block>& placed, double size_min, double size_max,
            double h_min, double h_max, double gap, SurfaceKind kind) {
  for (int attempt = 0; attempt < kPlacementAttempts; ++attempt) {
    const double w = uniform(rng, size_min, size_max);
    const double d = uniform(rng, size_min, size_max);
    const double h = uniform(rng, h_min, h_max);
    const double margin = 0.5;
    if (w + 2 * margin >= s.floor_x || d + 2 * margin >= s.floor_y) break;
    const double x0 = uniform(rng, margin, s.floor_x - margin - w);
    const double y0 = uniform(rng, margin, s.floor_y - margin - d);
    const Block b{x0, y0, x0 + w, y0 + d, h, kind};
    const bool free = std::none_of(placed.begin(), placed.end(), [&](const Block& o) { return b.overlaps(o, gap); });
    if (free) return b;
  }
  invalid_input("cannot place all objects without overlap; reduce box or clutter counts");
}

}  // namespace

SceneSpec SceneSpec::hall() {
  SceneSpec s;
  s.walls = {
      {5.0, 6.0, 13.0, 6.0, 3.0, 0.2},
      {17.0, 14.0, 25.0, 14.0, 3.0, 0.2},
      {8.0, 10.0, 8.0, 17.0, 3.0, 0.2},
      {22.0, 3.0, 22.0, 9.0, 3.0, 0.2},
  };
  return s;
}

std::string_view surface_name(SurfaceKind kind) noexcept {
  switch (kind) {
    case SurfaceKind::Floor: return "floor";
    case SurfaceKind::Wall: return "wall";
    case SurfaceKind::Box: return "box";
    case SurfaceKind::Clutter: return "clutter";
  }
  return "unknown";
}

ErrorModel ErrorModel::none() {
  ErrorModel m;
  m.sigma0 = 0.0;
  m.height_gain = 0.0;
  m.edge_gain = 0.0;
  m.sparse_gain = 0.0;
  m.drift_amplitude = 0.0;
  m.keep_max = 1.0;
  m.keep_min = 1.0;
  return m;
}

ReferenceScene generate_reference(const SceneSpec& spec) {
  validate(spec);
  std::vector<Block> blocks;
  for (const WallSegment& w : spec.walls) blocks.push_back(wall_block(w));
  Rng layout(derive_seed(spec.seed, kLayoutSalt));
  for (int i = 0; i < spec.box_count; ++i) {
    blocks.push_back(place(layout, spec, blocks, spec.box_size_min, spec.box_size_max, spec.box_height_min,
                           spec.box_height_max, 0.8, SurfaceKind::Box));
  }
  const auto n_clutter = static_cast<int>(std::llround(spec.clutter_density * spec.floor_x * spec.floor_y));
  for (int i = 0; i < n_clutter; ++i) {
    blocks.push_back(place(layout, spec, blocks, spec.clutter_size_min, spec.clutter_size_max, spec.clutter_size_min,
                           spec.clutter_size_max, 0.3, SurfaceKind::Clutter));
  }

  ReferenceScene scene;
  auto emit = [&](const Point3& p, const Point3& n, SurfaceKind k, double edge, std::uint32_t surface) {
    scene.cloud.points.push_back(p);
    scene.normal.push_back(n);
    scene.kind.push_back(k);
    scene.edge_distance.push_back(edge);
    scene.surface.push_back(surface);
  };

  // Floor, minus the footprints of everything standing on it. Edge distance
  // is the XY distance to the nearest footprint.
  {
    double free_area = spec.floor_x * spec.floor_y;
    for (const Block& b : blocks) {
      const double cx0 = std::max(b.x0, 0.0), cx1 = std::min(b.x1, spec.floor_x);
      const double cy0 = std::max(b.y0, 0.0), cy1 = std::min(b.y1, spec.floor_y);
      if (cx1 > cx0 && cy1 > cy0) free_area -= (cx1 - cx0) * (cy1 - cy0);
    }
    scene.surface_area.push_back(free_area);
    Rng rng(derive_seed(spec.seed, 1));
    const auto count = static_cast<std::size_t>(std::llround(spec.reference_density * free_area));
    for (std::size_t emitted = 0; emitted < count;) {
      const double x = uniform01(rng) * spec.floor_x;
      const double y = uniform01(rng) * spec.floor_y;
      if (std::any_of(blocks.begin(), blocks.end(), [&](const Block& b) { return b.contains_xy(x, y); })) continue;
      double edge = std::numeric_limits<double>::infinity();
      for (const Block& b : blocks) edge = std::min(edge, b.distance_xy(x, y));
      emit({x, y, 0.0}, {0, 0, 1}, SurfaceKind::Floor, edge, 0);
      ++emitted;
    }
  }

  for (const Block& b : blocks) {
    for (const Face& f : faces_of(b)) {
      const auto id = static_cast<std::uint32_t>(scene.surface_area.size());
      scene.surface_area.push_back(f.area());
      Rng rng(derive_seed(spec.seed, id + 1));
      const double lu = f.length_u(), lv = f.length_v();
      const auto count = static_cast<std::size_t>(std::llround(spec.reference_density * f.area()));
      for (std::size_t i = 0; i < count; ++i) {
        const double a = uniform01(rng), c = uniform01(rng);
        const Point3 p{f.origin.x + a * f.u.x + c * f.v.x, f.origin.y + a * f.u.y + c * f.v.y,
                       f.origin.z + a * f.u.z + c * f.v.z};
        const double edge = std::min({a * lu, (1 - a) * lu, c * lv, (1 - c) * lv});
        emit(p, f.normal, f.kind, edge, id);
      }
    }
  }
  return scene;
}

MlsScene generate_mls(const ReferenceScene& reference, const ErrorModel& m, std::uint64_t seed) {
  if (!(m.sigma0 >= 0.0 && m.height_gain >= 0.0 && m.edge_gain >= 0.0 && m.sparse_gain >= 0.0 &&
        m.drift_amplitude >= 0.0)) {
    invalid_input("error model amplitudes must be non-negative");
  }
  if (!(m.keep_min > 0.0 && m.keep_min <= m.keep_max && m.keep_max <= 1.0)) {
    invalid_input("keep probabilities must satisfy 0 < keep_min <= keep_max <= 1");
  }
  if (!(m.edge_radius > 0.0 && m.height_scale > 0.0 && m.keep_decay > 0.0 && m.drift_wavelength > 0.0)) {
    invalid_input("error model length scales must be positive");
  }

  Rng rng(derive_seed(seed, kMlsSalt));
  const double phase_x = 2.0 * std::numbers::pi * uniform01(rng);
  const double phase_y = 2.0 * std::numbers::pi * uniform01(rng);
  const double k = 2.0 * std::numbers::pi / m.drift_wavelength;
  const bool thinning = m.keep_min < 1.0;

  MlsScene out;
  const PointCloud& ref = reference.cloud;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const Point3& p = ref[i];
    const double keep = m.keep_min + (m.keep_max - m.keep_min) * std::exp(-std::abs(p.y - m.trajectory_y) / m.keep_decay);
    // Both draws happen for every point so the stream does not depend on
    // which points survive.
    const double u = uniform01(rng);
    const double noise = standard_normal(rng);
    if (thinning && u >= keep) continue;

    const double sparse = m.keep_min < 1.0 ? (1.0 - keep) / (1.0 - m.keep_min) : 0.0;
    const double sigma = m.sigma0 * (1.0 + m.height_gain * std::max(p.z, 0.0) / m.height_scale) *
                         (1.0 + m.edge_gain * std::exp(-reference.edge_distance[i] / m.edge_radius)) *
                         (1.0 + m.sparse_gain * sparse);
    const double drift = m.drift_amplitude * std::sin(k * p.x + phase_x) * std::sin(k * p.y + phase_y);
    const double offset = drift + sigma * noise;
    const Point3& n = reference.normal[i];
    out.cloud.points.push_back({p.x + offset * n.x, p.y + offset * n.y, p.z + offset * n.z});
    out.source.push_back(i);
    out.true_error.push_back(std::abs(offset));
    out.kind.push_back(reference.kind[i]);
  }
  return out;
}

void write_truth_csv(const MlsScene& scene, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) io_error("cannot write " + path.string());
  out << "point_index,injected_error,surface\n";
  char buf[64];
  for (std::size_t i = 0; i < scene.cloud.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.9g,", i, scene.true_error[i]);
    out << buf << surface_name(scene.kind[i]) << '\n';
  }
  if (!out) io_error("write failed for " + path.string());
}

}  // namespace mlsq
