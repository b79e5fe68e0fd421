#include "wpd/cloud.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "wpd/error.hpp"

namespace wpd {

void PointCloud::validate() const {
  const auto n = points.size();
  auto check = [n](std::size_t len, const char* what) {
    if (len != 0 && len != n) {
      fail(std::string(what) + " count " + std::to_string(len) + " does not match point count " +
           std::to_string(n));
    }
  };
  check(normals.size(), "normal");
  check(colors.size(), "color");
  check(classes.size(), "class");
  for (std::size_t i = 0; i < n; ++i) {
    if (!points[i].allFinite()) fail("non-finite coordinate at point " + std::to_string(i));
  }
}

PointCloud PointCloud::subset(std::span<const std::size_t> indices) const {
  PointCloud out;
  out.points.reserve(indices.size());
  for (auto i : indices) out.points.push_back(points[i]);
  if (has_normals()) {
    out.normals.reserve(indices.size());
    for (auto i : indices) out.normals.push_back(normals[i]);
  }
  if (has_colors()) {
    out.colors.reserve(indices.size());
    for (auto i : indices) out.colors.push_back(colors[i]);
  }
  if (has_classes()) {
    out.classes.reserve(indices.size());
    for (auto i : indices) out.classes.push_back(classes[i]);
  }
  return out;
}

BoundingBox compute_bbox(std::span<const Point3> points) {
  if (points.empty()) fail("empty input");
  BoundingBox box{points.front(), points.front()};
  for (const auto& p : points) {
    box.min = box.min.cwiseMin(p);
    box.max = box.max.cwiseMax(p);
  }
  return box;
}

double default_voxel_length(const BoundingBox& bbox, double factor) {
  const double longest = bbox.extents().maxCoeff();
  if (!(longest > 0.0)) fail("degenerate bounding box");
  return factor * longest;
}

VoxelIndex voxel_dims(const BoundingBox& bbox, double voxel_length) {
  VoxelIndex dims{};
  const auto ext = bbox.extents();
  for (int a = 0; a < 3; ++a) {
    const double cells = std::floor(ext[a] / voxel_length) + 1.0;
    if (cells > 2.0e9) fail("voxel grid too fine for the bounding box");
    dims[a] = static_cast<std::int32_t>(cells);
  }
  return dims;
}

VoxelIndex voxel_of(const Point3& p, const Point3& origin, double voxel_length,
                    const VoxelIndex& dims) {
  VoxelIndex idx{};
  for (int a = 0; a < 3; ++a) {
    const auto v = static_cast<std::int64_t>(std::floor((p[a] - origin[a]) / voxel_length));
    idx[a] = static_cast<std::int32_t>(std::clamp<std::int64_t>(v, 0, dims[a] - 1));
  }
  return idx;
}

VoxelGrid voxelize(const PointCloud& cloud, double voxel_length) {
  if (!(voxel_length > 0.0) || !std::isfinite(voxel_length)) fail("invalid voxel length");
  const auto bbox = compute_bbox(cloud.points);
  const auto dims = voxel_dims(bbox, voxel_length);

  // Pack into 64-bit keys; sorting + unique is cheaper than a hash set for
  // millions of points and yields a canonical order.
  const auto ny = static_cast<std::uint64_t>(dims[1]);
  const auto nz = static_cast<std::uint64_t>(dims[2]);
  if (static_cast<double>(dims[0]) * static_cast<double>(ny) * static_cast<double>(nz) > 1.8e19) {
    fail("voxel grid too fine for the bounding box");
  }
  std::vector<std::uint64_t> keys;
  keys.reserve(cloud.size());
  for (const auto& p : cloud.points) {
    const auto v = voxel_of(p, bbox.min, voxel_length, dims);
    keys.push_back((static_cast<std::uint64_t>(v[0]) * ny + static_cast<std::uint64_t>(v[1])) * nz +
                   static_cast<std::uint64_t>(v[2]));
  }
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());

  VoxelGrid grid;
  grid.voxel_length = voxel_length;
  grid.origin = bbox.min;
  grid.occupied.reserve(keys.size());
  for (auto k : keys) {
    const auto z = static_cast<std::int32_t>(k % nz);
    k /= nz;
    const auto y = static_cast<std::int32_t>(k % ny);
    const auto x = static_cast<std::int32_t>(k / ny);
    grid.occupied.push_back({x, y, z});
  }
  return grid;
}

}  // namespace wpd
