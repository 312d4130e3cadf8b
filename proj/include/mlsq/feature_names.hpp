#pragma once

#include <array>
#include <cstddef>
#include <string_view>

namespace mlsq {

inline constexpr std::size_t kFeatureCount = 21;

/// Canonical feature order. Table headers, model importances and reports all
/// use exactly these names in exactly this order.
inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "linearity",          "planarity",          "sphericity",
    "omnivariance",       "anisotropy",         "eigenentropy",
    "sum_eigenvalues",    "change_curvature",   "verticality",
    "Z_vals",             "delta_z",            "std_z",
    "radius_3D",          "density",            "radius_2D",
    "density_2D",         "sum_eigenvalues_2D", "ratio_eigenvalues_2D",
    "frequency_acc_map",  "delta_z_acc_map",    "std_z_acc_map",
};

enum FeatureIndex : std::size_t {
  kLinearity,
  kPlanarity,
  kSphericity,
  kOmnivariance,
  kAnisotropy,
  kEigenentropy,
  kSumEigenvalues,
  kChangeCurvature,
  kVerticality,
  kZVals,
  kDeltaZ,
  kStdZ,
  kRadius3D,
  kDensity,
  kRadius2D,
  kDensity2D,
  kSumEigenvalues2D,
  kRatioEigenvalues2D,
  kFrequencyAccMap,
  kDeltaZAccMap,
  kStdZAccMap,
};

}  // namespace mlsq
