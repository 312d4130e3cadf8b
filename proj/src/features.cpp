#include "mlsq/features.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "mlsq/error.hpp"
#include "mlsq/parallel.hpp"

namespace mlsq {
namespace {

// Eigenvalues below this fraction of the largest are round-off and are
// treated as exactly zero.
constexpr double kRelativeEigenFloor = 1e-12;

std::array<double, 3> clean_eigenvalues(double a, double b, double c) {
  std::array<double, 3> v{a, b, c};
  std::sort(v.begin(), v.end(), std::greater<>());
  for (double& x : v) {
    if (x < kRelativeEigenFloor * v[0] || x < 0.0) x = 0.0;
  }
  return v;
}

// Covariance of neighbors expressed relative to an anchor (the query point),
// which keeps the moment sums well conditioned far from the origin.
struct Moments {
  double n = 0.0;
  double sx = 0.0, sy = 0.0, sz = 0.0;
  double sxx = 0.0, sxy = 0.0, sxz = 0.0, syy = 0.0, syz = 0.0, szz = 0.0;

  void add(double x, double y, double z) {
    n += 1.0;
    sx += x;
    sy += y;
    sz += z;
    sxx += x * x;
    sxy += x * y;
    sxz += x * z;
    syy += y * y;
    syz += y * z;
    szz += z * z;
  }

  Eigen::Matrix3d covariance() const {
    const double mx = sx / n, my = sy / n, mz = sz / n;
    Eigen::Matrix3d c;
    c(0, 0) = sxx / n - mx * mx;
    c(1, 1) = syy / n - my * my;
    c(2, 2) = szz / n - mz * mz;
    c(0, 1) = c(1, 0) = sxy / n - mx * my;
    c(0, 2) = c(2, 0) = sxz / n - mx * mz;
    c(1, 2) = c(2, 1) = syz / n - my * mz;
    return c;
  }
};

struct Scratch {
  std::vector<Neighbor> neighbors;
  std::vector<Neighbor> neighbors_2d;
  std::vector<Point3> points;
};

Scratch& scratch() {
  thread_local Scratch s;
  return s;
}

void check_params(const NeighborhoodParams& p, std::size_t cloud_size) {
  if (p.k_min < 3) invalid_input("k_min must be at least 3");
  if (p.k_step < 1) invalid_input("k_step must be at least 1");
  if (p.k_max < p.k_min) invalid_input("k_max must not be below k_min");
  if (static_cast<std::size_t>(p.k_max) + 1 > cloud_size) {
    invalid_input("k_max must not exceed cloud size - 1");
  }
}

}  // namespace

EigenDecomp eigen_decompose(std::span<const Point3> neighborhood) {
  if (neighborhood.size() < 3) invalid_input("eigen decomposition needs at least 3 points");
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const Point3& p : neighborhood) centroid += Eigen::Vector3d(p.x, p.y, p.z);
  centroid /= static_cast<double>(neighborhood.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const Point3& p : neighborhood) {
    const Eigen::Vector3d d = Eigen::Vector3d(p.x, p.y, p.z) - centroid;
    cov.noalias() += d * d.transpose();
  }
  cov /= static_cast<double>(neighborhood.size());

  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
  // Eigen returns ascending eigenvalues.
  const Eigen::Vector3d ev = solver.eigenvalues();
  EigenDecomp out;
  out.values = clean_eigenvalues(ev(0), ev(1), ev(2));
  const Eigen::Vector3d n = solver.eigenvectors().col(0).normalized();
  out.normal = {n(0), n(1), n(2)};
  return out;
}

double eigenentropy(const std::array<double, 3>& eigenvalues) {
  const double sum = eigenvalues[0] + eigenvalues[1] + eigenvalues[2];
  if (!(sum > 0.0)) return 0.0;
  double h = 0.0;
  for (double l : eigenvalues) {
    const double e = l / sum;
    if (e > 0.0) h -= e * std::log(e);
  }
  return h;
}

std::vector<double> entropy_curve(std::size_t point_index, const SpatialIndex& index,
                                  const NeighborhoodParams& params) {
  check_params(params, index.size());
  auto& s = scratch();
  const auto& q = index.coord(point_index);
  index.knn(q, static_cast<std::size_t>(params.k_max), s.neighbors);

  std::vector<double> curve;
  Moments m;
  int next_k = params.k_min;
  for (int k = 1; k <= params.k_max; ++k) {
    const auto& c = index.coord(s.neighbors[static_cast<std::size_t>(k - 1)].index);
    m.add(c[0] - q[0], c[1] - q[1], c[2] - q[2]);
    if (k != next_k) continue;
    next_k += params.k_step;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver;
    solver.computeDirect(m.covariance(), Eigen::EigenvaluesOnly);
    const Eigen::Vector3d ev = solver.eigenvalues();
    const auto values = clean_eigenvalues(ev(0), ev(1), ev(2));
    const double sum = values[0] + values[1] + values[2];
    curve.push_back(sum > 0.0 ? eigenentropy(values) : std::numeric_limits<double>::quiet_NaN());
  }
  return curve;
}

int optimal_k(std::size_t point_index, const SpatialIndex& index, const NeighborhoodParams& params) {
  const auto curve = entropy_curve(point_index, index, params);
  int best_k = -1;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < curve.size(); ++i) {
    if (std::isnan(curve[i])) continue;
    if (curve[i] < best) {
      best = curve[i];
      best_k = params.k_min + static_cast<int>(i) * params.k_step;
    }
  }
  if (best_k < 0) degenerate("degenerate neighborhood at point " + std::to_string(point_index));
  return best_k;
}

AccumulationMap build_acc_map(const PointCloud& cloud, double bin_size) {
  if (!(bin_size > 0.0)) invalid_input("bin size must be positive");
  AccumulationMap map;
  map.bin_size_ = bin_size;
  if (cloud.empty()) return map;
  const Bounds3 box = bounds(cloud);
  const auto n_cols = static_cast<std::int64_t>(std::floor((box.max.x - box.min.x) / bin_size)) + 1;

  struct Accum {
    std::size_t count = 0;
    double z_min = std::numeric_limits<double>::infinity();
    double z_max = -std::numeric_limits<double>::infinity();
    double mean = 0.0;
    double m2 = 0.0;
  };
  std::unordered_map<std::int64_t, Accum> acc;
  map.bin_of_point_.resize(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Point3& p = cloud[i];
    const auto row = static_cast<std::int64_t>(std::floor((p.y - box.min.y) / bin_size));
    const auto col = static_cast<std::int64_t>(std::floor((p.x - box.min.x) / bin_size));
    const std::int64_t id = row * n_cols + col;
    map.bin_of_point_[i] = id;
    Accum& a = acc[id];
    ++a.count;
    a.z_min = std::min(a.z_min, p.z);
    a.z_max = std::max(a.z_max, p.z);
    const double delta = p.z - a.mean;
    a.mean += delta / static_cast<double>(a.count);
    a.m2 += delta * (p.z - a.mean);
  }
  map.bins_.reserve(acc.size());
  for (const auto& [id, a] : acc) {
    map.bins_[id] = AccumulationMap::Bin{a.count, a.z_min, a.z_max,
                                         std::sqrt(std::max(0.0, a.m2 / static_cast<double>(a.count)))};
  }
  return map;
}

FeatureVector extract_features(std::size_t point_index, const PointCloud& cloud,
                               const SpatialIndex& index, const PlanarIndex& index_2d,
                               const AccumulationMap& acc_map, int opt_n) {
  if (opt_n < 3 || static_cast<std::size_t>(opt_n) > cloud.size()) {
    invalid_input("invalid OptN " + std::to_string(opt_n));
  }
  auto& s = scratch();
  const Point3& p = cloud[point_index];
  const auto k = static_cast<std::size_t>(opt_n);

  index.knn(to_coord(p), k, s.neighbors);
  s.points.clear();
  for (const Neighbor& nb : s.neighbors) s.points.push_back(cloud[nb.index]);
  const EigenDecomp eig = eigen_decompose(s.points);
  const double sum = eig.values[0] + eig.values[1] + eig.values[2];
  if (!(sum > 0.0) || !(eig.values[0] > 0.0)) {
    degenerate("degenerate neighborhood at point " + std::to_string(point_index));
  }
  const double radius_3d = s.neighbors.back().distance;
  if (!(radius_3d > 0.0)) degenerate("zero radius at point " + std::to_string(point_index));

  const double e1 = eig.values[0] / sum;
  const double e2 = eig.values[1] / sum;
  const double e3 = eig.values[2] / sum;

  double z_min = p.z, z_max = p.z, z_mean = 0.0;
  for (const Point3& q : s.points) {
    z_min = std::min(z_min, q.z);
    z_max = std::max(z_max, q.z);
    z_mean += q.z;
  }
  z_mean /= static_cast<double>(k);
  double z_var = 0.0;
  for (const Point3& q : s.points) z_var += (q.z - z_mean) * (q.z - z_mean);
  z_var /= static_cast<double>(k);

  index_2d.knn(to_coord_2d(p), k, s.neighbors_2d);
  const double radius_2d = s.neighbors_2d.back().distance;
  if (!(radius_2d > 0.0)) degenerate("zero radius at point " + std::to_string(point_index));
  double mx = 0.0, my = 0.0;
  for (const Neighbor& nb : s.neighbors_2d) {
    mx += cloud[nb.index].x;
    my += cloud[nb.index].y;
  }
  mx /= static_cast<double>(k);
  my /= static_cast<double>(k);
  double cxx = 0.0, cxy = 0.0, cyy = 0.0;
  for (const Neighbor& nb : s.neighbors_2d) {
    const double dx = cloud[nb.index].x - mx;
    const double dy = cloud[nb.index].y - my;
    cxx += dx * dx;
    cxy += dx * dy;
    cyy += dy * dy;
  }
  cxx /= static_cast<double>(k);
  cxy /= static_cast<double>(k);
  cyy /= static_cast<double>(k);
  const double half_trace = 0.5 * (cxx + cyy);
  const double disc = std::sqrt(std::max(0.0, 0.25 * (cxx - cyy) * (cxx - cyy) + cxy * cxy));
  const double mu1 = half_trace + disc;
  const double mu2 = std::max(0.0, half_trace - disc);

  const AccumulationMap::Bin& bin = acc_map.bin_of_point(point_index);
  const double count_plus_self = static_cast<double>(opt_n + 1);

  FeatureVector f{};
  f[kLinearity] = (e1 - e2) / e1;
  f[kPlanarity] = (e2 - e3) / e1;
  f[kSphericity] = e3 / e1;
  f[kOmnivariance] = std::cbrt(e1 * e2 * e3);
  f[kAnisotropy] = (e1 - e3) / e1;
  f[kEigenentropy] = eigenentropy(eig.values);
  f[kSumEigenvalues] = sum;
  f[kChangeCurvature] = e3;
  f[kVerticality] = 1.0 - std::abs(eig.normal[2]);
  f[kZVals] = p.z;
  f[kDeltaZ] = z_max - z_min;
  f[kStdZ] = std::sqrt(z_var);
  f[kRadius3D] = radius_3d;
  f[kDensity] = count_plus_self / (4.0 / 3.0 * std::numbers::pi * radius_3d * radius_3d * radius_3d);
  f[kRadius2D] = radius_2d;
  f[kDensity2D] = count_plus_self / (std::numbers::pi * radius_2d * radius_2d);
  f[kSumEigenvalues2D] = mu1 + mu2;
  f[kRatioEigenvalues2D] = mu1 > 0.0 ? mu2 / mu1 : 0.0;
  f[kFrequencyAccMap] = static_cast<double>(bin.count);
  f[kDeltaZAccMap] = bin.z_max - bin.z_min;
  f[kStdZAccMap] = bin.z_std;
  return f;
}

FeatureExtractor::FeatureExtractor(const PointCloud& cloud, const FeatureParams& params)
    : cloud_(cloud),
      params_(params),
      index_(build_index(cloud, params.leaf_size)),
      index_2d_(build_index_2d(cloud, params.leaf_size)),
      acc_map_(build_acc_map(cloud, params.acc_bin_size)) {
  check_params(params_.neighborhood, cloud.size());
}

PointFeatures FeatureExtractor::compute(std::size_t point_index) const {
  PointFeatures out;
  out.opt_n = optimal_k(point_index, index_, params_.neighborhood);
  out.values = extract_features(point_index, cloud_, index_, index_2d_, acc_map_, out.opt_n);
  return out;
}

FeatureExtractor::Batch FeatureExtractor::compute_all(std::span<const std::size_t> point_indices,
                                                      unsigned threads) const {
  std::vector<PointFeatures> all(point_indices.size());
  std::vector<std::uint8_t> ok(point_indices.size(), 0);
  parallel_for(point_indices.size(), threads, [&](std::size_t i) {
    try {
      all[i] = compute(point_indices[i]);
      ok[i] = 1;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Degenerate) throw;
    }
  });
  Batch batch;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (ok[i]) {
      batch.kept.push_back(i);
      batch.features.push_back(all[i]);
    } else {
      batch.dropped.push_back(i);
    }
  }
  return batch;
}

Standardizer Standardizer::fit(const Matrix& train_rows) {
  if (train_rows.rows() < 2) invalid_input("standardizer needs at least 2 training rows");
  const std::size_t n = train_rows.rows();
  const std::size_t d = train_rows.cols();
  Standardizer s;
  s.mean_.assign(d, 0.0);
  s.stddev_.assign(d, 0.0);
  s.constant_.assign(d, false);
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = train_rows.row(r);
    for (std::size_t c = 0; c < d; ++c) s.mean_[c] += row[c];
  }
  for (double& m : s.mean_) m /= static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = train_rows.row(r);
    for (std::size_t c = 0; c < d; ++c) {
      const double dv = row[c] - s.mean_[c];
      s.stddev_[c] += dv * dv;
    }
  }
  for (std::size_t c = 0; c < d; ++c) {
    s.stddev_[c] = std::sqrt(s.stddev_[c] / static_cast<double>(n));
    s.constant_[c] = !(s.stddev_[c] > 0.0);
  }
  return s;
}

Standardizer Standardizer::from_parts(std::vector<double> mean, std::vector<double> stddev) {
  if (mean.size() != stddev.size()) invalid_input("standardizer mean/std arity mismatch");
  Standardizer s;
  s.mean_ = std::move(mean);
  s.stddev_ = std::move(stddev);
  s.constant_.resize(s.stddev_.size());
  for (std::size_t c = 0; c < s.stddev_.size(); ++c) s.constant_[c] = !(s.stddev_[c] > 0.0);
  return s;
}

Matrix Standardizer::apply(const Matrix& rows) const {
  if (rows.cols() != mean_.size()) invalid_input("standardizer arity mismatch");
  Matrix out(rows.rows(), rows.cols());
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    const auto src = rows.row(r);
    auto dst = out.row(r);
    for (std::size_t c = 0; c < rows.cols(); ++c) {
      const double centered = src[c] - mean_[c];
      dst[c] = constant_[c] ? centered : centered / stddev_[c];
    }
  }
  return out;
}

}  // namespace mlsq
