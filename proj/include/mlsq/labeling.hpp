#pragma once

#include <cstdint>
#include <vector>

#include "mlsq/geometry.hpp"
#include "mlsq/kdtree.hpp"

namespace mlsq {

inline constexpr double kDefaultCutoff = 0.100;    // meters
inline constexpr double kDefaultThreshold = 0.020;  // meters

/// Directed cloud-to-cloud distance: element i is the Euclidean distance
/// from scan[i] to its nearest point in the reference index.
std::vector<double> c2c_distances(const PointCloud& scan, const SpatialIndex& reference_index,
                                  unsigned threads = 1);

/// mask[i] = distances[i] < cutoff. Throws if cutoff is not positive.
std::vector<bool> apply_cutoff(const std::vector<double>& distances, double cutoff = kDefaultCutoff);

/// 1 (qualified) iff distance < threshold, else 0.
/// Throws "threshold must be below cutoff" when threshold >= cutoff.
std::vector<std::uint8_t> label(const std::vector<double>& distances,
                                double threshold = kDefaultThreshold,
                                double cutoff = kDefaultCutoff);

}  // namespace mlsq
