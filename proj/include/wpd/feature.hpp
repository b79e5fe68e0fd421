#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "wpd/cloud.hpp"

namespace wpd {

enum class ClassificationSource { ExternalLabels, CovarianceDetector };

struct Classification {
  std::vector<PointClass> classes;
  ClassificationSource source = ClassificationSource::ExternalLabels;
  /// Surface variation per point; filled by the covariance detector only.
  std::vector<double> variation;
};

/// Reads one 0/1 label per line (0 = normal, 1 = edge).
Classification load_labels(const std::filesystem::path& path, std::size_t expected_count);

/// Writes the same format load_labels reads.
void write_labels(const std::filesystem::path& path, std::span<const PointClass> classes);

inline constexpr std::size_t kDefaultDetectorK = 16;
inline constexpr double kDefaultDetectorTau = 0.12;

/// lambda0 / (lambda0 + lambda1 + lambda2) of the covariance of a point set,
/// lambda0 the smallest eigenvalue.  Returns 0 when all eigenvalues vanish.
double surface_variation(std::span<const Point3> points);

/// Marks a point Edge when the surface variation of itself plus its k
/// nearest neighbors exceeds tau.
Classification detect_edges_covariance(const PointCloud& cloud, std::size_t k = kDefaultDetectorK,
                                       double tau = kDefaultDetectorTau);

/// Per-point radius multiplier: 0.5 for Edge, 1 for Normal.
std::vector<double> radius_scale(std::span<const PointClass> classes);

/// Per-point disk radius: r/2 for Edge points, r otherwise.
std::vector<double> assign_radii(std::span<const PointClass> classes, double r);

/// True when point `i` is an Edge point with at least one Normal neighbor;
/// such points keep their position during smoothing.
bool edge_freeze_predicate(std::size_t i, std::span<const PointClass> classes,
                           std::span<const std::size_t> neighbors);

}  // namespace wpd
