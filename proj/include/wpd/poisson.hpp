#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "wpd/cloud.hpp"
#include "wpd/error.hpp"

namespace wpd {

inline constexpr double kDefaultLambda = 0.68;
inline constexpr double kTheta1 = 1.8;  // damping when too few points
inline constexpr double kTheta2 = 3.0;  // damping when too many points
inline constexpr double kDefaultTolerance = 0.05;

/// Disk radius derived from the voxel surface-area estimate.
struct RadiusEstimate {
  double radius = 0.0;
  double surface_area = 0.0;  // m * l_v^2
  double lambda = kDefaultLambda;
  std::size_t voxel_count = 0;
  double voxel_length = 0.0;
};

struct RefinementStep {
  double radius;
  std::size_t count;
};

struct RefinementState {
  double radius = 0.0;          // radius that produced the returned subset
  double relative_error = 0.0;  // 1 - |P'| / n
  std::size_t iterations = 0;   // sampling passes run
  std::vector<RefinementStep> history;
};

/// Subset chosen by refine_count plus how it got there.
struct Refinement {
  std::vector<std::size_t> indices;
  RefinementState state;
};

/// Raised when the count never enters the target band.  Carries the subset
/// whose count came closest to n.
class RefinementError : public Error {
 public:
  RefinementError(const std::string& what, Refinement best)
      : Error(ErrorKind::NonConvergence, what), best_(std::move(best)) {}

  const Refinement& best() const noexcept { return best_; }

 private:
  Refinement best_;
};

/// Half the bounding-box surface area: l*h + w*h + l*w.
double estimate_area_bbox(const BoundingBox& bbox);

/// One face per occupied voxel: m * l_v^2.
double estimate_area_voxel(const VoxelGrid& grid);

/// r = l_v * sqrt(m / (lambda * n * pi)).
RadiusEstimate estimate_radius(const VoxelGrid& grid, std::size_t n,
                               double lambda = kDefaultLambda);

/// How the excess term mu of the growth branch is measured.
enum class MuMode {
  /// mu = (count - n) / 2 in points.  Steps shrink as n grows, so an initial
  /// overshoot of more than a few percent is not corrected within a
  /// practical iteration budget once n reaches the thousands.
  Absolute,
  /// mu = (count - n) / (2 n), the same excess as a fraction of n.
  Relative,
};

/// One radius update from a sampling pass that produced `count` points.
///
/// With R = 1 - count/n: R > 0 shrinks r by (1 - R/theta1); R < -tolerance
/// grows it by (1 - R/(theta2 + mu)).  Inside the band the radius is
/// returned unchanged.
double update_radius(double radius, std::size_t count, std::size_t n,
                     double tolerance = kDefaultTolerance, MuMode mu_mode = MuMode::Relative);

/// Dart throwing over the input points.
///
/// Points are visited in a seeded uniform random permutation; a point is
/// accepted iff no earlier-accepted q lies strictly within
/// min(radius(p), radius(q)).  Per-point radii are base_radius * scale[i]
/// (scale empty means uniform).  Returns accepted indices in ascending order.
std::vector<std::size_t> poisson_disk_indices(std::span<const Point3> points, double base_radius,
                                              std::span<const double> scale, std::uint64_t seed);

/// Same as above with explicit per-point radii.
std::vector<std::size_t> poisson_disk_indices(std::span<const Point3> points,
                                              std::span<const double> radii, std::uint64_t seed);

PointCloud poisson_disk_subsample(const PointCloud& cloud, std::span<const double> radii,
                                  std::uint64_t seed);

struct RefineOptions {
  std::size_t max_iters = 50;
  double tolerance = kDefaultTolerance;
  MuMode mu_mode = MuMode::Relative;
  /// Per-point radius multipliers (1 for normal points, 0.5 for edge
  /// points); empty for uniform sampling.
  std::span<const double> scale = {};
};

/// Resamples with the estimated radius, then updates the radius and
/// resamples until n <= |P'| <= (1 + tolerance) n.
Refinement refine_count(std::span<const Point3> points, std::size_t n,
                        const RadiusEstimate& estimate, std::uint64_t seed,
                        const RefineOptions& options = {});

/// Seeded Fisher-Yates permutation of [0, n); stable across platforms.
std::vector<std::uint32_t> visiting_order(std::size_t n, std::uint64_t seed);

}  // namespace wpd
