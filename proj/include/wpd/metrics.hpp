#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "wpd/cloud.hpp"
#include "wpd/spatial_index.hpp"
#include "wpd/tangent.hpp"

namespace wpd {

enum class Direction { ResampledToOriginal, Symmetric };

struct ConsistencyReport {
  double hausdorff = 0.0;
  double mean = 0.0;
  Direction direction = Direction::ResampledToOriginal;
};

inline constexpr std::size_t kDefaultMetricK = 6;
/// Neighborhood size of the interior test.
inline constexpr std::size_t kInteriorK = 16;

struct UniformityReport {
  double d_local = 0.0;
  double d_voronoi = 0.0;
  std::size_t k = kDefaultMetricK;
  bool interior_only = true;
  std::size_t evaluated = 0;     // points entering the d_local spread
  std::size_t interior_cells = 0;  // points entering the Voronoi spread
};

/// max over a in A of the distance to the nearest b in B; with `symmetric`
/// the larger of both directions.
double hausdorff(std::span<const Point3> a, std::span<const Point3> b, bool symmetric = false);

/// Mean over a in A of the distance to the nearest b in B.
double mean_distance(std::span<const Point3> a, std::span<const Point3> b);

/// Directed (resampled -> original) or symmetric report.  The symmetric mean
/// is the average of both directed means.
ConsistencyReport consistency(std::span<const Point3> resampled, std::span<const Point3> original,
                              bool symmetric = false);

/// Tangent-plane neighborhood of point i built from itself and its k nearest
/// neighbors.  Empty when the neighborhood is degenerate.
std::optional<TangentNeighborhood> local_neighborhood(std::span<const Point3> points,
                                                      const KdTree& tree, std::size_t i,
                                                      std::size_t k);

/// Mean distance from each point to its k nearest neighbors.
std::vector<double> mean_knn_distances(std::span<const Point3> points, const KdTree& tree,
                                       std::size_t k);

/// Spread (max - min) of the per-point mean k-NN distance.  With
/// `interior_only`, only interior points enter the spread: the tangent
/// Voronoi cell over max(k, kInteriorK) neighbors is closed and inside their
/// hull, and the cell over k neighbors is closed.
double local_density_error(std::span<const Point3> points, std::size_t k = kDefaultMetricK,
                           bool interior_only = true);

/// Spread (max - min) of tangent-plane Voronoi cell areas over interior
/// points (as above).  Throws when fewer than 10% of the points qualify.
double voronoi_density_error(std::span<const Point3> points, std::size_t k = kDefaultMetricK);

UniformityReport uniformity(std::span<const Point3> points, std::size_t k = kDefaultMetricK,
                            bool interior_only = true);

/// Order-fixed pairwise summation.
double pairwise_sum(std::span<const double> values);

}  // namespace wpd
