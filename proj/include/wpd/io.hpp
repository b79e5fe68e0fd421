#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "wpd/cloud.hpp"

namespace wpd {

enum class CloudFormat { PlyBinary, PlyAscii, Xyz };

/// Reads .ply (ascii or binary_little_endian; vertex x/y/z plus optional
/// nx/ny/nz, red/green/blue and class) or .xyz ("x y z [nx ny nz]" per line).
/// Point order follows the file.
PointCloud read_cloud(const std::filesystem::path& path);

/// .ply -> binary PLY, .xyz -> XYZ.
CloudFormat format_for(const std::filesystem::path& path);

/// Writes through a temporary file renamed into place.  Binary PLY stores
/// doubles, so positions round-trip bit-exactly; ASCII output uses shortest
/// round-trip decimal formatting.
void write_cloud(const PointCloud& cloud, const std::filesystem::path& path, CloudFormat format);

inline void write_cloud(const PointCloud& cloud, const std::filesystem::path& path) {
  write_cloud(cloud, path, format_for(path));
}

/// Parses PLY from memory; `origin` names the source in error messages.
PointCloud parse_ply(std::string_view data, const std::string& origin = "<memory>");
PointCloud parse_xyz(std::string_view data, const std::string& origin = "<memory>");

}  // namespace wpd
