#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "wpd/cloud.hpp"

namespace wpd {

using Point2 = Eigen::Vector2d;

/// Orthonormal frame {e1, e2, normal} anchored at a point.
struct LocalFrame {
  Point3 origin = Point3::Zero();
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
  Eigen::Vector3d e1 = Eigen::Vector3d::UnitX();
  Eigen::Vector3d e2 = Eigen::Vector3d::UnitY();

  Point2 project(const Point3& p) const {
    const Eigen::Vector3d d = p - origin;
    return {d.dot(e1), d.dot(e2)};
  }
  Point3 lift(const Point2& uv) const { return origin + uv.x() * e1 + uv.y() * e2; }
};

/// Unit normal of a point set: the covariance eigenvector with the smallest
/// eigenvalue, oriented to positive z (then y, then x on exact ties).
/// Throws on fewer than 3 points or a collinear set.
Eigen::Vector3d estimate_normal(std::span<const Point3> points);

/// Frame with the given normal and a deterministic in-plane basis.
LocalFrame make_frame(const Point3& origin, const Eigen::Vector3d& normal);

/// A center point and its neighbors mapped into the center's tangent plane.
///
/// The center sits at (0, 0).  `ring` lists the center's neighbors in the
/// local Delaunay triangulation in counter-clockwise order; consecutive ring
/// entries span the triangles incident to the center.  `cell` holds the
/// vertices of the center's Voronoi cell (circumcenters of those triangles).
/// Both are empty when the cell is unbounded.  A bounded cell can still
/// reach far past the sampled neighborhood when the center sits just inside
/// the hull; the two flags below catch that.
struct TangentNeighborhood {
  LocalFrame frame;
  std::vector<Point2> neighbors2d;
  std::vector<std::size_t> neighbor_ids;
  std::vector<std::size_t> ring;  // positions into neighbors2d
  std::vector<Point2> cell;
  bool cell_closed = false;
  bool cell_in_hull = false;       // every cell vertex inside the hull of neighbors2d
  bool cell_within_reach = false;  // no cell vertex farther than the farthest neighbor

  double cell_area() const;
};

/// Projects `neighbors` into `frame` and builds the center's Delaunay star.
/// `ids` (optional) are carried through as global indices.  Throws when
/// fewer than 3 neighbors remain or they do not span the plane.
TangentNeighborhood project_to_tangent(const Point3& center, std::span<const Point3> neighbors,
                                       const LocalFrame& frame,
                                       std::span<const std::size_t> ids = {});

/// True iff (0,0) lies strictly inside the convex hull of `pts`.
bool strictly_inside_hull(std::span<const Point2> pts);

/// Builds the Delaunay star of the origin over `pts` (which must not contain
/// the origin).  Returns the ring in CCW order, or nothing when the origin is
/// not strictly inside the hull.
std::optional<std::vector<std::size_t>> delaunay_star(std::span<const Point2> pts);

struct CotangentWeights {
  std::vector<double> w;  // parallel to TangentNeighborhood::ring, clamped >= 0
  std::vector<double> raw;
  double sum = 0.0;
  bool uniform_fallback = false;
};

/// (cot a + cot b) / 2 for every star edge, a and b the angles opposite the
/// edge in its two incident triangles.  Negative weights clamp to 0; if the
/// clamped sum vanishes every ring neighbor gets weight 1.
CotangentWeights cotangent_weights(const TangentNeighborhood& tn);

/// Weighted centroid of the ring neighbors, lifted back to 3D.
Point3 displace(const TangentNeighborhood& tn, const CotangentWeights& w);

/// Area centroid of the center's Voronoi cell, lifted back to 3D.  Throws
/// unless the cell is closed and inside the neighbor hull.
Point3 voronoi_centroid(const TangentNeighborhood& tn);

/// Repeatedly deletes the point with the smallest current nearest-neighbor
/// distance (lower index first on ties) until n remain.  Returns the kept
/// indices in ascending order.  With `scale`, each point's distance is
/// divided by its radius multiplier so half-radius edge points compete on
/// equal terms with normal points.
std::vector<std::size_t> trim_indices(std::span<const Point3> points, std::size_t n,
                                      std::span<const double> scale = {});
PointCloud trim_to_exact_count(const PointCloud& cloud, std::size_t n,
                               std::span<const double> scale = {});

inline constexpr std::size_t kDefaultSmoothK = 16;
inline constexpr std::size_t kDefaultSmoothIterations = 5;

/// Target of one point's move.
enum class Displacement {
  /// Area centroid of the local Voronoi cell, assembled from the fan
  /// triangles whose areas the cotangent weights measure.
  CellCentroid,
  /// Cotangent-weighted mean of the Delaunay ring.  In a flat tangent plane
  /// this reproduces the center up to rounding (the cotangent Laplacian of
  /// a linear function vanishes), so points barely move.
  RingAverage,
};

struct SmoothOptions {
  std::size_t k = kDefaultSmoothK;
  std::size_t iterations = kDefaultSmoothIterations;
  Displacement displacement = Displacement::CellCentroid;
};

/// Per-pass bookkeeping, mainly for reports and tests.
struct SmoothPassStats {
  std::size_t moved = 0;
  std::size_t unclosed = 0;
  std::size_t degenerate = 0;
  std::size_t edge_frozen = 0;
};

/// Runs Jacobi passes of weighted central displacement.  Every pass rebuilds
/// neighborhoods from the pass-start positions and commits all moves at
/// once.  Edge points with a Normal neighbor, points whose cell is open (or,
/// for CellCentroid, leaves the neighbor hull) and points with degenerate
/// neighborhoods stay put.
PointCloud smooth(const PointCloud& cloud, const SmoothOptions& options,
                  std::vector<SmoothPassStats>* stats = nullptr);

/// One pass over `points`; returns the new positions.
std::vector<Point3> smooth_pass(std::span<const Point3> points, std::size_t k,
                                std::span<const PointClass> classes,
                                SmoothPassStats* stats = nullptr,
                                Displacement mode = Displacement::CellCentroid);

}  // namespace wpd
