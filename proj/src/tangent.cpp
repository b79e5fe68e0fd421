#include "wpd/tangent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <queue>

#include <Eigen/Eigenvalues>

#include "wpd/error.hpp"
#include "wpd/feature.hpp"
#include "wpd/parallel.hpp"
#include "wpd/spatial_index.hpp"

namespace wpd {
namespace {

constexpr double kRelEps = 1e-12;

double cross2(const Point2& a, const Point2& b) { return a.x() * b.y() - a.y() * b.x(); }

// Parameter t of the circumcenter a/2 + t * perp(a) of (0, a, q).
double circle_param(const Point2& a, const Point2& q) {
  return (q.squaredNorm() - q.dot(a)) / (2.0 * cross2(a, q));
}

Point2 circumcenter(const Point2& a, const Point2& q) {
  const Point2 perp(-a.y(), a.x());
  return 0.5 * a + circle_param(a, q) * perp;
}

// Cotangent of the angle at `apex` in the triangle (apex, u, v).
double cot_at(const Point2& apex, const Point2& u, const Point2& v) {
  const Point2 a = u - apex;
  const Point2 b = v - apex;
  const double cr = std::abs(cross2(a, b));
  const double scale = a.norm() * b.norm();
  if (!(cr > kRelEps * scale)) return 0.0;
  return a.dot(b) / cr;
}

// Counter-clockwise hull without collinear vertices.
std::vector<Point2> convex_hull(std::vector<Point2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Point2& a, const Point2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  if (pts.size() < 3) return pts;
  std::vector<Point2> hull(2 * pts.size());
  std::size_t h = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (h >= 2 && cross2(hull[h - 1] - hull[h - 2], pts[i] - hull[h - 2]) <= 0.0) --h;
    hull[h++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, lower = h + 1; i-- > 0;) {
    while (h >= lower && cross2(hull[h - 1] - hull[h - 2], pts[i] - hull[h - 2]) <= 0.0) --h;
    hull[h++] = pts[i];
  }
  hull.resize(h - 1);
  return hull;
}

// True when every cell vertex lies in the CCW convex `hull`, boundary
// included up to rounding relative to `scale`.
bool cell_inside(const std::vector<Point2>& cell, const std::vector<Point2>& hull, double scale) {
  for (std::size_t e = 0; e < hull.size(); ++e) {
    const Point2& a = hull[e];
    const Point2 dir = hull[(e + 1) % hull.size()] - a;
    const double slack = kRelEps * dir.norm() * scale;
    for (const auto& v : cell) {
      if (cross2(dir, v - a) < -slack) return false;
    }
  }
  return true;
}

enum class PointStatus : std::uint8_t { Moved, Unclosed, Degenerate, EdgeFrozen };

}  // namespace

Eigen::Vector3d estimate_normal(std::span<const Point3> points) {
  if (points.size() < 3) fail("degenerate neighborhood");
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& p : points) mean += p;
  mean /= static_cast<double>(points.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : points) {
    const Eigen::Vector3d d = p - mean;
    cov.noalias() += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
  const auto& ev = solver.eigenvalues();
  if (!(ev[2] > 0.0) || !(ev[1] > 1e-10 * ev[2])) fail("degenerate neighborhood");

  Eigen::Vector3d n = solver.eigenvectors().col(0).normalized();
  constexpr double tie = 1e-12;
  double s = 0.0;
  if (std::abs(n.z()) > tie) {
    s = n.z();
  } else if (std::abs(n.y()) > tie) {
    s = n.y();
  } else {
    s = n.x();
  }
  return s < 0.0 ? Eigen::Vector3d(-n) : n;
}

LocalFrame make_frame(const Point3& origin, const Eigen::Vector3d& normal) {
  LocalFrame f;
  f.origin = origin;
  f.normal = normal.normalized();
  int axis = 0;
  f.normal.cwiseAbs().minCoeff(&axis);
  Eigen::Vector3d ref = Eigen::Vector3d::Zero();
  ref[axis] = 1.0;
  f.e1 = (ref - ref.dot(f.normal) * f.normal).normalized();
  f.e2 = f.normal.cross(f.e1);
  return f;
}

double TangentNeighborhood::cell_area() const {
  double twice = 0.0;
  for (std::size_t i = 0; i < cell.size(); ++i) {
    twice += cross2(cell[i], cell[(i + 1) % cell.size()]);
  }
  return 0.5 * std::abs(twice);
}

bool strictly_inside_hull(std::span<const Point2> pts) {
  std::vector<double> angles;
  angles.reserve(pts.size());
  double scale = 0.0;
  for (const auto& q : pts) scale = std::max(scale, q.norm());
  for (const auto& q : pts) {
    if (q.norm() > kRelEps * scale) angles.push_back(std::atan2(q.y(), q.x()));
  }
  if (angles.size() < 3) return false;
  std::sort(angles.begin(), angles.end());
  double widest = angles.front() + 2.0 * std::numbers::pi - angles.back();
  for (std::size_t i = 1; i < angles.size(); ++i) {
    widest = std::max(widest, angles[i] - angles[i - 1]);
  }
  return widest < std::numbers::pi - 1e-9;
}

std::optional<std::vector<std::size_t>> delaunay_star(std::span<const Point2> pts) {
  if (pts.size() < 3) return std::nullopt;
  std::size_t start = 0;
  for (std::size_t j = 1; j < pts.size(); ++j) {
    if (pts[j].squaredNorm() < pts[start].squaredNorm()) start = j;
  }

  // Gift-wrap around the origin: from star edge (0, a) the next CCW
  // neighbor is the left-side point whose circle through 0 and a has the
  // smallest center parameter.  Cocircular ties go to the point angularly
  // closest to a so every cocircular neighbor ends up in the ring.
  std::vector<std::size_t> ring{start};
  std::vector<std::uint8_t> used(pts.size(), 0);
  used[start] = 1;
  std::size_t cur = start;
  for (std::size_t step = 0; step <= pts.size(); ++step) {
    const Point2& a = pts[cur];
    std::size_t best = pts.size();
    double best_t = std::numeric_limits<double>::infinity();
    double best_angle = 0.0;
    for (std::size_t j = 0; j < pts.size(); ++j) {
      if (j == cur) continue;
      const Point2& q = pts[j];
      const double side = cross2(a, q);
      if (!(side > kRelEps * a.norm() * q.norm())) continue;
      const double t = circle_param(a, q);
      const double angle = std::atan2(side, a.dot(q));
      const double tol = 1e-10 * (std::abs(t) + a.norm());
      if (best == pts.size() || t < best_t - tol ||
          (std::abs(t - best_t) <= tol && angle < best_angle)) {
        best = j;
        best_t = t;
        best_angle = angle;
      }
    }
    if (best == pts.size()) return std::nullopt;
    if (best == start) return ring.size() >= 3 ? std::optional(ring) : std::nullopt;
    if (used[best]) return std::nullopt;
    used[best] = 1;
    ring.push_back(best);
    cur = best;
  }
  return std::nullopt;
}

TangentNeighborhood project_to_tangent(const Point3& center, std::span<const Point3> neighbors,
                                       const LocalFrame& frame,
                                       std::span<const std::size_t> ids) {
  TangentNeighborhood tn;
  tn.frame = frame;
  tn.frame.origin = center;
  tn.neighbors2d.reserve(neighbors.size());
  for (const auto& q : neighbors) tn.neighbors2d.push_back(tn.frame.project(q));
  tn.neighbor_ids.assign(ids.begin(), ids.end());

  double scale = 0.0;
  for (const auto& q : tn.neighbors2d) scale = std::max(scale, q.norm());
  std::vector<std::size_t> usable;
  for (std::size_t j = 0; j < tn.neighbors2d.size(); ++j) {
    if (tn.neighbors2d[j].norm() > kRelEps * scale) usable.push_back(j);
  }
  bool spans = false;
  for (std::size_t a = 0; a < usable.size() && !spans; ++a) {
    for (std::size_t b = a + 1; b < usable.size() && !spans; ++b) {
      const auto& p = tn.neighbors2d[usable[a]];
      const auto& q = tn.neighbors2d[usable[b]];
      spans = std::abs(cross2(p, q)) > 1e-9 * p.norm() * q.norm();
    }
  }
  if (usable.size() < 3 || !spans) fail("degenerate projection");

  std::vector<Point2> pts;
  pts.reserve(usable.size());
  for (auto j : usable) pts.push_back(tn.neighbors2d[j]);
  if (!strictly_inside_hull(pts)) return tn;
  const auto star = delaunay_star(pts);
  if (!star) return tn;

  tn.cell_closed = true;
  tn.ring.reserve(star->size());
  for (auto s : *star) tn.ring.push_back(usable[s]);
  tn.cell.reserve(tn.ring.size());
  for (std::size_t i = 0; i < tn.ring.size(); ++i) {
    tn.cell.push_back(circumcenter(tn.neighbors2d[tn.ring[i]],
                                   tn.neighbors2d[tn.ring[(i + 1) % tn.ring.size()]]));
  }
  tn.cell_in_hull = cell_inside(tn.cell, convex_hull(pts), scale);
  tn.cell_within_reach = std::all_of(tn.cell.begin(), tn.cell.end(),
                                     [&](const Point2& v) { return v.norm() <= scale; });
  return tn;
}

CotangentWeights cotangent_weights(const TangentNeighborhood& tn) {
  if (!tn.cell_closed || tn.ring.size() < 3) fail("boundary point, no weights");
  const auto m = tn.ring.size();
  const Point2 origin = Point2::Zero();
  CotangentWeights out;
  out.raw.resize(m);
  out.w.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const Point2& q = tn.neighbors2d[tn.ring[i]];
    const Point2& next = tn.neighbors2d[tn.ring[(i + 1) % m]];
    const Point2& prev = tn.neighbors2d[tn.ring[(i + m - 1) % m]];
    const double cot_alpha = cot_at(next, origin, q);
    const double cot_beta = cot_at(prev, origin, q);
    out.raw[i] = 0.5 * (cot_alpha + cot_beta);
    out.w[i] = std::max(out.raw[i], 0.0);
    out.sum += out.w[i];
  }
  if (!(out.sum > 1e-12 * static_cast<double>(m))) {
    std::fill(out.w.begin(), out.w.end(), 1.0);
    out.sum = static_cast<double>(m);
    out.uniform_fallback = true;
  }
  return out;
}

Point3 displace(const TangentNeighborhood& tn, const CotangentWeights& w) {
  if (!tn.cell_closed) fail("boundary point, no weights");
  if (w.w.size() != tn.ring.size() || !(w.sum > 0.0)) fail("weights do not match neighborhood");
  Point2 uv = Point2::Zero();
  for (std::size_t i = 0; i < tn.ring.size(); ++i) {
    uv += (w.w[i] / w.sum) * tn.neighbors2d[tn.ring[i]];
  }
  return tn.frame.lift(uv);
}

Point3 voronoi_centroid(const TangentNeighborhood& tn) {
  if (!tn.cell_closed || tn.cell.size() < 3) fail("boundary point, no weights");
  if (!tn.cell_in_hull) fail("cell reaches past the neighborhood");
  const auto& region = tn.cell;
  // Fan of triangles from the center; the one across ring edge j has area
  // w_ij |p_j|^2 / 4.
  double twice_area = 0.0;
  Point2 moment = Point2::Zero();
  for (std::size_t t = 0; t < region.size(); ++t) {
    const Point2& a = region[(t + region.size() - 1) % region.size()];
    const Point2& b = region[t];
    const double c = cross2(a, b);
    twice_area += c;
    moment += c * (a + b);
  }
  if (!(twice_area > 0.0)) fail("degenerate cell");
  return tn.frame.lift(moment / (3.0 * twice_area));
}

std::vector<std::size_t> trim_indices(std::span<const Point3> points, std::size_t n,
                                      std::span<const double> scale) {
  const std::size_t total = points.size();
  if (n > total) fail("cannot trim below input size");
  if (!scale.empty() && scale.size() != total) fail("scale count mismatch");
  if (n == 0) fail("target count must be positive");
  std::vector<std::size_t> kept;
  if (n == total) {
    kept.resize(total);
    for (std::size_t i = 0; i < total; ++i) kept[i] = i;
    return kept;
  }

  // Tombstones over an immutable tree; the tree is rebuilt over the
  // survivors once half of its points are gone.
  std::vector<std::uint8_t> removed(total, 0);
  std::vector<std::size_t> local_to_global(total);
  std::vector<std::size_t> global_to_local(total);
  for (std::size_t i = 0; i < total; ++i) local_to_global[i] = global_to_local[i] = i;
  std::vector<std::uint8_t> local_removed(total, 0);
  auto tree = std::make_unique<KdTree>(points);
  std::size_t tree_removed = 0;

  constexpr std::size_t kNoPoint = static_cast<std::size_t>(-1);
  std::vector<std::size_t> nn(total, kNoPoint);
  std::vector<double> nn_dist(total, std::numeric_limits<double>::infinity());
  parallel_for(total, [&](std::size_t i) {
    const auto hit = tree->knn_of(i, 1).front();
    nn[i] = hit.index;
    nn_dist[i] = hit.distance;
  });

  const auto key = [&](std::size_t i) { return scale.empty() ? nn_dist[i] : nn_dist[i] / scale[i]; };

  std::vector<std::vector<std::size_t>> pointed_by(total);
  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
  for (std::size_t i = 0; i < total; ++i) {
    pointed_by[nn[i]].push_back(i);
    queue.emplace(key(i), i);
  }

  std::size_t excess = total - n;
  while (excess > 0) {
    const auto [d, i] = queue.top();
    queue.pop();
    if (removed[i] || d != key(i)) continue;  // stale
    removed[i] = 1;
    local_removed[global_to_local[i]] = 1;
    ++tree_removed;
    --excess;
    if (excess == 0) break;

    if (2 * tree_removed > tree->size()) {
      std::vector<Point3> alive;
      local_to_global.clear();
      for (std::size_t g = 0; g < total; ++g) {
        if (removed[g]) continue;
        global_to_local[g] = local_to_global.size();
        local_to_global.push_back(g);
        alive.push_back(points[g]);
      }
      tree = std::make_unique<KdTree>(alive);
      local_removed.assign(alive.size(), 0);
      tree_removed = 0;
    }

    auto dependents = std::move(pointed_by[i]);
    pointed_by[i].clear();
    for (auto j : dependents) {
      if (removed[j] || nn[j] != i) continue;
      const auto hit = tree->nearest_alive(points[j], local_removed, global_to_local[j]);
      if (hit.index >= tree->size()) {
        nn[j] = kNoPoint;
        nn_dist[j] = std::numeric_limits<double>::infinity();
      } else {
        nn[j] = local_to_global[hit.index];
        nn_dist[j] = hit.distance;
        pointed_by[nn[j]].push_back(j);
      }
      queue.emplace(key(j), j);
    }
  }

  kept.reserve(n);
  for (std::size_t i = 0; i < total; ++i) {
    if (!removed[i]) kept.push_back(i);
  }
  return kept;
}

PointCloud trim_to_exact_count(const PointCloud& cloud, std::size_t n,
                               std::span<const double> scale) {
  return cloud.subset(trim_indices(cloud.points, n, scale));
}

std::vector<Point3> smooth_pass(std::span<const Point3> points, std::size_t k,
                                std::span<const PointClass> classes, SmoothPassStats* stats,
                                Displacement mode) {
  if (k < 3) fail("smoothing needs k >= 3");
  if (k + 1 > points.size()) fail("smoothing needs more than k points");
  if (!classes.empty() && classes.size() != points.size()) fail("class count mismatch");

  const KdTree tree(points);
  std::vector<Point3> out(points.begin(), points.end());
  std::vector<PointStatus> status(points.size(), PointStatus::Moved);

  parallel_for(points.size(), [&](std::size_t i) {
    const auto nbrs = tree.knn_of(i, k);
    std::vector<std::size_t> ids(nbrs.size());
    std::vector<Point3> local;
    local.reserve(nbrs.size() + 1);
    local.push_back(points[i]);
    for (std::size_t j = 0; j < nbrs.size(); ++j) {
      ids[j] = nbrs[j].index;
      local.push_back(points[nbrs[j].index]);
    }
    if (!classes.empty() && edge_freeze_predicate(i, classes, ids)) {
      status[i] = PointStatus::EdgeFrozen;
      return;
    }
    try {
      const auto frame = make_frame(points[i], estimate_normal(local));
      const auto tn = project_to_tangent(points[i], std::span(local).subspan(1), frame, ids);
      if (!tn.cell_closed || (mode == Displacement::CellCentroid && !tn.cell_in_hull)) {
        status[i] = PointStatus::Unclosed;
        return;
      }
      out[i] = mode == Displacement::CellCentroid ? voronoi_centroid(tn)
                                                  : displace(tn, cotangent_weights(tn));
    } catch (const Error&) {
      status[i] = PointStatus::Degenerate;
    }
  });

  if (stats != nullptr) {
    *stats = {};
    for (auto s : status) {
      switch (s) {
        case PointStatus::Moved: ++stats->moved; break;
        case PointStatus::Unclosed: ++stats->unclosed; break;
        case PointStatus::Degenerate: ++stats->degenerate; break;
        case PointStatus::EdgeFrozen: ++stats->edge_frozen; break;
      }
    }
  }
  return out;
}

PointCloud smooth(const PointCloud& cloud, const SmoothOptions& options,
                  std::vector<SmoothPassStats>* stats) {
  PointCloud out = cloud;
  if (stats != nullptr) stats->clear();
  for (std::size_t pass = 0; pass < options.iterations; ++pass) {
    SmoothPassStats s;
    out.points = smooth_pass(out.points, options.k, out.classes, &s, options.displacement);
    if (stats != nullptr) stats->push_back(s);
  }
  return out;
}

}  // namespace wpd
