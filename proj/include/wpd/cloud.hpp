#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace wpd {

using Point3 = Eigen::Vector3d;
using Rgb = std::array<std::uint8_t, 3>;

enum class PointClass : std::uint8_t { Normal = 0, Edge = 1 };

/// A point set with optional per-point attributes.  Every attribute vector
/// is either empty (absent) or exactly as long as `points`.
struct PointCloud {
  std::vector<Point3> points;
  std::vector<Eigen::Vector3d> normals;
  std::vector<Rgb> colors;
  std::vector<PointClass> classes;

  std::size_t size() const noexcept { return points.size(); }
  bool empty() const noexcept { return points.empty(); }
  bool has_normals() const noexcept { return !normals.empty(); }
  bool has_colors() const noexcept { return !colors.empty(); }
  bool has_classes() const noexcept { return !classes.empty(); }

  /// Throws if an attribute length disagrees with the point count or a
  /// coordinate is not finite.
  void validate() const;

  /// Copies the points at `indices` (in that order) with their attributes.
  PointCloud subset(std::span<const std::size_t> indices) const;
};

struct BoundingBox {
  Point3 min;
  Point3 max;

  Eigen::Vector3d extents() const { return max - min; }
};

/// Integer voxel coordinate.
using VoxelIndex = std::array<std::int32_t, 3>;

struct VoxelGrid {
  double voxel_length = 0.0;
  Point3 origin = Point3::Zero();
  /// Distinct occupied voxels, sorted lexicographically.
  std::vector<VoxelIndex> occupied;

  std::size_t count() const noexcept { return occupied.size(); }
};

BoundingBox compute_bbox(std::span<const Point3> points);
inline BoundingBox compute_bbox(const PointCloud& cloud) { return compute_bbox(cloud.points); }

/// 0.05 (or `factor`) times the largest bounding-box extent.
double default_voxel_length(const BoundingBox& bbox, double factor = 0.05);

/// Voxel owning `p`: floor((p - origin) / l_v) per axis, clamped into
/// [0, dims-1] so rounding can never push a point outside the grid.
VoxelIndex voxel_of(const Point3& p, const Point3& origin, double voxel_length,
                    const VoxelIndex& dims);

/// Number of voxels per axis for a box: floor(extent / l_v) + 1.
VoxelIndex voxel_dims(const BoundingBox& bbox, double voxel_length);

VoxelGrid voxelize(const PointCloud& cloud, double voxel_length);

}  // namespace wpd
