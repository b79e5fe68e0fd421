#include "wpd/metrics.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "wpd/error.hpp"
#include "wpd/parallel.hpp"

namespace wpd {
namespace {

std::vector<double> nearest_distances(std::span<const Point3> from, std::span<const Point3> to) {
  if (from.empty() || to.empty()) fail("empty cloud");
  const KdTree tree(to);
  std::vector<double> d(from.size());
  parallel_for(from.size(), [&](std::size_t i) { d[i] = tree.knn(from[i], 1).front().distance; });
  return d;
}

struct CellSurvey {
  std::vector<std::uint8_t> closed;
  std::vector<double> area;
};

CellSurvey survey_cells(std::span<const Point3> points, const KdTree& tree, std::size_t k) {
  CellSurvey s;
  s.closed.assign(points.size(), 0);
  s.area.assign(points.size(), 0.0);
  const std::size_t k_wide = std::min(std::max(k, kInteriorK), points.size() - 1);
  parallel_for(points.size(), [&](std::size_t i) {
    const auto wide = local_neighborhood(points, tree, i, k_wide);
    if (!wide || !wide->cell_closed || !wide->cell_in_hull) return;
    const auto tn = local_neighborhood(points, tree, i, k);
    if (tn && tn->cell_closed) {
      s.closed[i] = 1;
      s.area[i] = tn->cell_area();
    }
  });
  return s;
}

void check_k(std::span<const Point3> points, std::size_t k) {
  if (k == 0) fail("k must be at least 1");
  if (points.size() < k + 1) fail("too few points for k = " + std::to_string(k));
}

}  // namespace

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const auto half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

double hausdorff(std::span<const Point3> a, std::span<const Point3> b, bool symmetric) {
  const auto ab = nearest_distances(a, b);
  double h = *std::max_element(ab.begin(), ab.end());
  if (symmetric) {
    const auto ba = nearest_distances(b, a);
    h = std::max(h, *std::max_element(ba.begin(), ba.end()));
  }
  return h;
}

double mean_distance(std::span<const Point3> a, std::span<const Point3> b) {
  const auto ab = nearest_distances(a, b);
  return pairwise_sum(ab) / static_cast<double>(ab.size());
}

ConsistencyReport consistency(std::span<const Point3> resampled, std::span<const Point3> original,
                              bool symmetric) {
  const auto ab = nearest_distances(resampled, original);
  ConsistencyReport r;
  r.direction = symmetric ? Direction::Symmetric : Direction::ResampledToOriginal;
  r.hausdorff = *std::max_element(ab.begin(), ab.end());
  r.mean = pairwise_sum(ab) / static_cast<double>(ab.size());
  if (symmetric) {
    const auto ba = nearest_distances(original, resampled);
    r.hausdorff = std::max(r.hausdorff, *std::max_element(ba.begin(), ba.end()));
    r.mean = 0.5 * (r.mean + pairwise_sum(ba) / static_cast<double>(ba.size()));
  }
  return r;
}

std::optional<TangentNeighborhood> local_neighborhood(std::span<const Point3> points,
                                                      const KdTree& tree, std::size_t i,
                                                      std::size_t k) {
  const auto nbrs = tree.knn_of(i, k);
  std::vector<Point3> local;
  std::vector<std::size_t> ids;
  local.reserve(k + 1);
  ids.reserve(k);
  local.push_back(points[i]);
  for (const auto& nb : nbrs) {
    local.push_back(points[nb.index]);
    ids.push_back(nb.index);
  }
  try {
    const auto frame = make_frame(points[i], estimate_normal(local));
    return project_to_tangent(points[i], std::span(local).subspan(1), frame, ids);
  } catch (const Error&) {
    return std::nullopt;
  }
}

std::vector<double> mean_knn_distances(std::span<const Point3> points, const KdTree& tree,
                                       std::size_t k) {
  std::vector<double> out(points.size());
  parallel_for(points.size(), [&](std::size_t i) {
    double s = 0.0;
    for (const auto& nb : tree.knn_of(i, k)) s += nb.distance;
    out[i] = s / static_cast<double>(k);
  });
  return out;
}

UniformityReport uniformity(std::span<const Point3> points, std::size_t k, bool interior_only) {
  check_k(points, k);
  const KdTree tree(points);
  const auto dbar = mean_knn_distances(points, tree, k);
  const auto cells = survey_cells(points, tree, k);

  UniformityReport r;
  r.k = k;
  r.interior_only = interior_only;

  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  double area_lo = lo, area_hi = hi;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (cells.closed[i]) {
      ++r.interior_cells;
      area_lo = std::min(area_lo, cells.area[i]);
      area_hi = std::max(area_hi, cells.area[i]);
    }
    if (interior_only && !cells.closed[i]) continue;
    ++r.evaluated;
    lo = std::min(lo, dbar[i]);
    hi = std::max(hi, dbar[i]);
  }
  if (r.evaluated == 0) fail("insufficient interior points");
  r.d_local = hi - lo;
  if (10 * r.interior_cells < points.size()) fail("insufficient interior points");
  r.d_voronoi = area_hi - area_lo;
  return r;
}

double local_density_error(std::span<const Point3> points, std::size_t k, bool interior_only) {
  check_k(points, k);
  const KdTree tree(points);
  const auto dbar = mean_knn_distances(points, tree, k);
  std::vector<std::uint8_t> keep(points.size(), 1);
  if (interior_only) keep = survey_cells(points, tree, k).closed;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  bool any = false;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!keep[i]) continue;
    any = true;
    lo = std::min(lo, dbar[i]);
    hi = std::max(hi, dbar[i]);
  }
  if (!any) fail("insufficient interior points");
  return hi - lo;
}

double voronoi_density_error(std::span<const Point3> points, std::size_t k) {
  check_k(points, k);
  const KdTree tree(points);
  const auto cells = survey_cells(points, tree, k);
  std::size_t closed = 0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!cells.closed[i]) continue;
    ++closed;
    lo = std::min(lo, cells.area[i]);
    hi = std::max(hi, cells.area[i]);
  }
  if (10 * closed < points.size()) fail("insufficient interior points");
  return hi - lo;
}

}  // namespace wpd
