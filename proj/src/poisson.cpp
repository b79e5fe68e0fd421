#include "wpd/poisson.hpp"

#include <absl/container/flat_hash_map.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "wpd/spatial_index.hpp"

namespace wpd {
namespace {

constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();
constexpr double kMaxCellsPerAxis = 1 << 20;

std::uint64_t pack_cell(std::int64_t x, std::int64_t y, std::int64_t z) {
  // Coordinates are shifted by one so the -1 neighbor of cell 0 stays
  // non-negative; each fits in 21 bits.
  return (static_cast<std::uint64_t>(x + 1) << 42) | (static_cast<std::uint64_t>(y + 1) << 21) |
         static_cast<std::uint64_t>(z + 1);
}

// Core dart thrower.  radius_at(i) gives the exclusion radius of point i and
// max_radius bounds all of them.
template <class RadiusAt>
std::vector<std::size_t> throw_darts(std::span<const Point3> points,
                                     std::span<const std::uint32_t> order, RadiusAt&& radius_at,
                                     double max_radius) {
  const auto bbox = compute_bbox(points);
  const double longest = bbox.extents().maxCoeff();
  const double cell = std::max(max_radius, longest / kMaxCellsPerAxis);
  const double inv = cell > 0.0 ? 1.0 / cell : 0.0;

  absl::flat_hash_map<std::uint64_t, std::uint32_t> heads;
  std::vector<std::uint32_t> next(points.size(), kNone);
  std::vector<std::size_t> accepted;

  for (const auto idx : order) {
    const Point3& p = points[idx];
    const double rp = radius_at(idx);
    const auto cx = static_cast<std::int64_t>((p.x() - bbox.min.x()) * inv);
    const auto cy = static_cast<std::int64_t>((p.y() - bbox.min.y()) * inv);
    const auto cz = static_cast<std::int64_t>((p.z() - bbox.min.z()) * inv);

    bool blocked = false;
    for (std::int64_t dx = -1; dx <= 1 && !blocked; ++dx) {
      for (std::int64_t dy = -1; dy <= 1 && !blocked; ++dy) {
        for (std::int64_t dz = -1; dz <= 1 && !blocked; ++dz) {
          const auto it = heads.find(pack_cell(cx + dx, cy + dy, cz + dz));
          if (it == heads.end()) continue;
          for (auto q = it->second; q != kNone; q = next[q]) {
            const double limit = std::min(rp, radius_at(q));
            if ((points[q] - p).squaredNorm() < limit * limit) {
              blocked = true;
              break;
            }
          }
        }
      }
    }
    if (blocked) continue;

    auto [it, inserted] = heads.try_emplace(pack_cell(cx, cy, cz), idx);
    if (!inserted) {
      next[idx] = it->second;
      it->second = idx;
    }
    accepted.push_back(idx);
  }
  std::sort(accepted.begin(), accepted.end());
  return accepted;
}

void check_points(std::span<const Point3> points) {
  if (points.empty()) fail("empty input");
  if (points.size() >= kNone) fail("too many points");
}

}  // namespace

double estimate_area_bbox(const BoundingBox& bbox) {
  const auto e = bbox.extents();
  const double l = e.x(), w = e.y(), h = e.z();
  return l * h + w * h + l * w;
}

double estimate_area_voxel(const VoxelGrid& grid) {
  return static_cast<double>(grid.count()) * grid.voxel_length * grid.voxel_length;
}

RadiusEstimate estimate_radius(const VoxelGrid& grid, std::size_t n, double lambda) {
  if (n == 0) fail("target count must be positive");
  if (!(lambda > 0.0)) fail("lambda must be positive");
  if (grid.count() == 0) fail("voxel grid is empty");
  RadiusEstimate est;
  est.lambda = lambda;
  est.voxel_count = grid.count();
  est.voxel_length = grid.voxel_length;
  est.surface_area = estimate_area_voxel(grid);
  est.radius = grid.voxel_length * std::sqrt(static_cast<double>(grid.count()) /
                                             (lambda * static_cast<double>(n) * std::numbers::pi));
  return est;
}

double update_radius(double radius, std::size_t count, std::size_t n, double tolerance,
                     MuMode mu_mode) {
  const double target = static_cast<double>(n);
  const double rel = 1.0 - static_cast<double>(count) / target;
  if (rel > 0.0) return radius * (1.0 - rel / kTheta1);
  if (static_cast<double>(count) > (1.0 + tolerance) * target) {
    double mu = (static_cast<double>(count) - target) / 2.0;
    if (mu_mode == MuMode::Relative) mu /= target;
    return radius * (1.0 - rel / (kTheta2 + mu));
  }
  return radius;
}

std::vector<std::uint32_t> visiting_order(std::size_t n, std::uint64_t seed) {
  std::vector<std::uint32_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<std::uint32_t>(i);
  std::mt19937_64 rng(seed);
  // std::uniform_int_distribution is implementation-defined; plain
  // rejection sampling keeps the permutation identical across toolchains.
  for (std::size_t i = n; i > 1; --i) {
    const std::uint64_t bound = i;
    const std::uint64_t threshold = (0 - bound) % bound;
    std::uint64_t x = rng();
    while (x < threshold) x = rng();
    std::swap(order[i - 1], order[x % bound]);
  }
  return order;
}

std::vector<std::size_t> poisson_disk_indices(std::span<const Point3> points, double base_radius,
                                              std::span<const double> scale, std::uint64_t seed) {
  check_points(points);
  if (!(base_radius > 0.0)) fail("radius must be positive");
  if (!scale.empty() && scale.size() != points.size()) fail("radius scale count mismatch");
  const auto order = visiting_order(points.size(), seed);
  if (scale.empty()) {
    return throw_darts(points, order, [base_radius](std::size_t) { return base_radius; },
                       base_radius);
  }
  const double max_scale = *std::max_element(scale.begin(), scale.end());
  return throw_darts(points, order, [&](std::size_t i) { return base_radius * scale[i]; },
                     base_radius * max_scale);
}

std::vector<std::size_t> poisson_disk_indices(std::span<const Point3> points,
                                              std::span<const double> radii, std::uint64_t seed) {
  check_points(points);
  if (radii.size() != points.size()) fail("radius count mismatch");
  for (double r : radii) {
    if (!(r > 0.0)) fail("radius must be positive");
  }
  const auto order = visiting_order(points.size(), seed);
  const double max_radius = *std::max_element(radii.begin(), radii.end());
  return throw_darts(points, order, [&](std::size_t i) { return radii[i]; }, max_radius);
}

PointCloud poisson_disk_subsample(const PointCloud& cloud, std::span<const double> radii,
                                  std::uint64_t seed) {
  return cloud.subset(poisson_disk_indices(cloud.points, radii, seed));
}

Refinement refine_count(std::span<const Point3> points, std::size_t n,
                        const RadiusEstimate& estimate, std::uint64_t seed,
                        const RefineOptions& options) {
  check_points(points);
  if (n == 0) fail("target count must be positive");
  if (n > points.size()) fail("target exceeds input size");
  if (!(options.tolerance > 0.0 && options.tolerance < 1.0)) fail("tolerance must be in (0, 1)");
  if (!(estimate.radius > 0.0)) fail("radius must be positive");
  const auto& scale = options.scale;
  if (!scale.empty() && scale.size() != points.size()) fail("radius scale count mismatch");

  const double upper = (1.0 + options.tolerance) * static_cast<double>(n);
  auto in_band = [&](std::size_t count) {
    return count >= n && static_cast<double>(count) <= upper;
  };

  // Keeping every point is the only admissible answer; the radius that
  // realizes it is anything up to the closest pair distance.
  if (n == points.size()) {
    Refinement all;
    all.indices.resize(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) all.indices[i] = i;
    double closest = estimate.radius;
    if (points.size() > 1) {
      const KdTree tree(points);
      for (std::size_t i = 0; i < points.size(); ++i) {
        closest = std::min(closest, tree.knn_of(i, 1).front().distance);
      }
    }
    all.state.radius = closest;
    all.state.history.push_back({closest, points.size()});
    return all;
  }

  const auto order = visiting_order(points.size(), seed);
  const double max_scale = scale.empty() ? 1.0 : *std::max_element(scale.begin(), scale.end());

  Refinement best;
  bool have_best = false;
  auto closeness = [n](std::size_t count) {
    return count > n ? count - n : n - count;
  };

  RefinementState state;
  double radius = estimate.radius;
  for (std::size_t iter = 0; iter < options.max_iters; ++iter) {
    std::vector<std::size_t> picked;
    if (scale.empty()) {
      picked = throw_darts(points, order, [radius](std::size_t) { return radius; }, radius);
    } else {
      picked = throw_darts(points, order, [&](std::size_t i) { return radius * scale[i]; },
                           radius * max_scale);
    }
    const std::size_t count = picked.size();
    state.history.push_back({radius, count});
    state.iterations = iter + 1;
    state.radius = radius;
    state.relative_error = 1.0 - static_cast<double>(count) / static_cast<double>(n);

    if (in_band(count)) return {std::move(picked), std::move(state)};
    if (!have_best || closeness(count) < closeness(best.indices.size())) {
      best.indices = std::move(picked);
      best.state = state;
      have_best = true;
    }
    radius = update_radius(radius, count, n, options.tolerance, options.mu_mode);
  }
  best.state.history = state.history;
  best.state.iterations = state.iterations;
  throw RefinementError("radius refinement did not reach the target band after " +
                            std::to_string(options.max_iters) + " iterations",
                        std::move(best));
}

}  // namespace wpd
