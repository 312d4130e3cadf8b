#include "mlsq/labeling.hpp"

#include <cmath>

#include "mlsq/error.hpp"
#include "mlsq/parallel.hpp"

namespace mlsq {

std::vector<double> c2c_distances(const PointCloud& scan, const SpatialIndex& reference_index,
                                  unsigned threads) {
  if (reference_index.size() == 0) invalid_input("empty reference");
  require_finite(scan);
  std::vector<double> out(scan.size());
  parallel_for(scan.size(), threads, [&](std::size_t i) {
    out[i] = reference_index.nearest(to_coord(scan[i])).distance;
  });
  return out;
}

std::vector<bool> apply_cutoff(const std::vector<double>& distances, double cutoff) {
  if (!(cutoff > 0.0)) invalid_input("cutoff must be positive");
  std::vector<bool> mask(distances.size());
  for (std::size_t i = 0; i < distances.size(); ++i) mask[i] = distances[i] < cutoff;
  return mask;
}

std::vector<std::uint8_t> label(const std::vector<double>& distances, double threshold, double cutoff) {
  if (!(threshold > 0.0)) invalid_input("threshold must be positive");
  if (threshold >= cutoff) invalid_input("threshold must be below cutoff");
  std::vector<std::uint8_t> labels(distances.size());
  for (std::size_t i = 0; i < distances.size(); ++i) labels[i] = distances[i] < threshold ? 1 : 0;
  return labels;
}

}  // namespace mlsq
