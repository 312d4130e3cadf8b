#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "mlsq/feature_names.hpp"
#include "mlsq/feature_table.hpp"
#include "mlsq/geometry.hpp"
#include "mlsq/kdtree.hpp"
#include "mlsq/matrix.hpp"

namespace mlsq {

/// Eigenvalues of a neighborhood covariance, descending and non-negative,
/// with the unit eigenvector of the smallest one.
struct EigenDecomp {
  std::array<double, 3> values{};
  std::array<double, 3> normal{};
};

/// Population covariance about the centroid. Throws for fewer than 3 points.
EigenDecomp eigen_decompose(std::span<const Point3> neighborhood);

/// -sum e_i ln e_i over e_i = lambda_i / sum(lambda), with 0 ln 0 = 0.
/// Returns 0 when every eigenvalue is zero.
double eigenentropy(const std::array<double, 3>& eigenvalues);

struct NeighborhoodParams {
  int k_min = 10;
  int k_max = 100;
  int k_step = 1;
};

/// Eigenentropy E(k) of the k nearest neighbors (the point itself included)
/// for every candidate k; NaN where the neighborhood has zero spread.
std::vector<double> entropy_curve(std::size_t point_index, const SpatialIndex& index,
                                  const NeighborhoodParams& params);

/// argmin_k E(k), smallest k on ties. Throws "degenerate neighborhood" when
/// every candidate neighborhood collapses to a single location.
int optimal_k(std::size_t point_index, const SpatialIndex& index, const NeighborhoodParams& params);

/// XY binning of a cloud (same floor rule as the fold grid) with per-bin
/// count and height statistics.
class AccumulationMap {
 public:
  struct Bin {
    std::size_t count = 0;
    double z_min = 0.0;
    double z_max = 0.0;
    double z_std = 0.0;  // population
  };

  double bin_size() const noexcept { return bin_size_; }
  std::size_t bin_count() const noexcept { return bins_.size(); }
  std::int64_t bin_id_of_point(std::size_t i) const { return bin_of_point_[i]; }
  const Bin& bin_of_point(std::size_t i) const { return bins_.at(bin_of_point_[i]); }
  const std::unordered_map<std::int64_t, Bin>& bins() const noexcept { return bins_; }

  friend AccumulationMap build_acc_map(const PointCloud& cloud, double bin_size);

 private:
  double bin_size_ = 0.25;
  std::unordered_map<std::int64_t, Bin> bins_;
  std::vector<std::int64_t> bin_of_point_;
};

AccumulationMap build_acc_map(const PointCloud& cloud, double bin_size = 0.25);

/// The 21 features of one point from its OptN-point 3D neighborhood, its
/// OptN-point XY neighborhood and its accumulation-map bin.
/// Throws "degenerate neighborhood" or "zero radius" (Degenerate).
FeatureVector extract_features(std::size_t point_index, const PointCloud& cloud,
                               const SpatialIndex& index, const PlanarIndex& index_2d,
                               const AccumulationMap& acc_map, int opt_n);

struct PointFeatures {
  FeatureVector values{};
  int opt_n = 0;
};

struct FeatureParams {
  NeighborhoodParams neighborhood;
  double acc_bin_size = 0.25;
  std::size_t leaf_size = 16;
};

/// Holds the indices and accumulation map for one cloud so that features can
/// be computed for any subset of its points.
class FeatureExtractor {
 public:
  FeatureExtractor(const PointCloud& cloud, const FeatureParams& params);

  /// Throws Degenerate for collapsed neighborhoods.
  PointFeatures compute(std::size_t point_index) const;

  struct Batch {
    std::vector<PointFeatures> features;  // aligned with the kept points
    std::vector<std::size_t> kept;        // positions into the request
    std::vector<std::size_t> dropped;     // positions into the request
  };

  /// Computes every requested point, dropping degenerate ones.
  Batch compute_all(std::span<const std::size_t> point_indices, unsigned threads) const;

  const NeighborhoodParams& neighborhood() const noexcept { return params_.neighborhood; }

 private:
  const PointCloud& cloud_;
  FeatureParams params_;
  SpatialIndex index_;
  PlanarIndex index_2d_;
  AccumulationMap acc_map_;
};

/// Z-score normalization with statistics from training rows only.
class Standardizer {
 public:
  static Standardizer fit(const Matrix& train_rows);
  static Standardizer from_parts(std::vector<double> mean, std::vector<double> stddev);

  Matrix apply(const Matrix& rows) const;

  const std::vector<double>& mean() const noexcept { return mean_; }
  const std::vector<double>& stddev() const noexcept { return stddev_; }
  /// Columns with zero training variance: centered but not scaled.
  const std::vector<bool>& constant() const noexcept { return constant_; }

 private:
  std::vector<double> mean_;
  std::vector<double> stddev_;
  std::vector<bool> constant_;
};

}  // namespace mlsq
