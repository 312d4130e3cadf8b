#pragma once

#include <filesystem>

#include "mlsq/geometry.hpp"

namespace mlsq {

enum class CloudFileFormat { XyzAscii, PlyAscii, PlyBinaryLe };

/// ".xyz"/".txt" map to XYZ; ".ply" files are told apart by their header.
/// A file whose first line is "ply" is treated as PLY regardless of extension.
CloudFileFormat detect_format(const std::filesystem::path& path);

PointCloud read_cloud(const std::filesystem::path& path, CloudFileFormat format);
PointCloud read_cloud(const std::filesystem::path& path);

/// Writes x, y, z as float64 (PLY) or with 17 significant digits (XYZ), so
/// every format round-trips coordinates exactly.
void write_cloud(const PointCloud& cloud, const std::filesystem::path& path,
                 CloudFileFormat format);

}  // namespace mlsq
