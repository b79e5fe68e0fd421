#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <numbers>
#include <random>

#include <Eigen/Geometry>

#include "support/expect.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"
#include "wpd/metrics.hpp"
#include "wpd/spatial_index.hpp"
#include "wpd/tangent.hpp"
#include "wpd/feature.hpp"

using namespace wpd;
using wpd::testing::as_cloud;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<Point3> ring_points(std::size_t m, double radius, double phase = 0.0) {
  std::vector<Point3> pts;
  for (std::size_t i = 0; i < m; ++i) {
    const double a = phase + 2.0 * kPi * static_cast<double>(i) / static_cast<double>(m);
    pts.emplace_back(radius * std::cos(a), radius * std::sin(a), 0.0);
  }
  return pts;
}

TangentNeighborhood flat(std::span<const Point3> nbrs) {
  return project_to_tangent(Point3::Zero(), nbrs, make_frame(Point3::Zero(), Eigen::Vector3d::UnitZ()));
}

Eigen::Matrix3d rotation(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
  return q.normalized().toRotationMatrix();
}

// Deletion loop exactly as described: recompute every nearest-neighbor
// distance, drop the smallest (lowest index on ties), repeat.
std::vector<std::size_t> trim_oracle(std::span<const Point3> pts, std::size_t n,
                                     std::span<const double> scale = {}) {
  std::vector<std::size_t> alive(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) alive[i] = i;
  while (alive.size() > n) {
    std::size_t victim = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < alive.size(); ++a) {
      double d = std::numeric_limits<double>::infinity();
      for (std::size_t b = 0; b < alive.size(); ++b) {
        if (a != b) d = std::min(d, oracle::dist(pts[alive[a]], pts[alive[b]]));
      }
      if (!scale.empty()) d /= scale[alive[a]];
      if (d < best) {
        best = d;
        victim = a;
      }
    }
    alive.erase(alive.begin() + static_cast<std::ptrdiff_t>(victim));
  }
  return alive;
}

double interior_d_local(std::span<const Point3> pts) { return local_density_error(pts, 6, true); }

}  // namespace

// ---------------------------------------------------------------- trimming

TEST_CASE("trimming to the current size is the identity") {
  const auto pts = wpd::testing::plane(50, 1);
  const auto kept = trim_indices(pts, 50);
  REQUIRE(kept.size() == 50);
  for (std::size_t i = 0; i < 50; ++i) CHECK(kept[i] == i);
}

TEST_CASE("collinear trim drops the lower index of the closest pair") {
  const std::vector<Point3> pts{{0, 0, 0}, {0.1, 0, 0}, {1, 0, 0}, {2, 0, 0}};
  CHECK(trim_indices(pts, 3) == std::vector<std::size_t>{1, 2, 3});
  const auto c = trim_to_exact_count(as_cloud(pts), 3);
  CHECK(c.points[0] == Point3(0.1, 0, 0));
}

TEST_CASE("each trimming step never shrinks the minimum spacing") {
  auto pts = wpd::testing::grid(20, 20, 0.05);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 0.95);
  for (int i = 0; i < 30; ++i) pts.emplace_back(u(rng), u(rng), 0.0);
  double prev = oracle::min_pairwise(pts);
  for (std::size_t n = 429; n >= 400; --n) {
    const auto kept = trim_indices(pts, n);
    REQUIRE(kept.size() == n);
    const double now = oracle::min_pairwise(as_cloud(pts).subset(kept).points);
    CHECK(now >= prev);
    prev = now;
  }
}

TEST_CASE("trimming matches the naive deletion loop") {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const auto pts = wpd::testing::torus(160 + 10 * seed, seed);
    const std::size_t n = 60 + 5 * seed;
    CHECK(trim_indices(pts, n) == trim_oracle(pts, n));
    std::vector<double> scale(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) scale[i] = (i % 3 == 0) ? 0.5 : 1.0;
    CHECK(trim_indices(pts, n, scale) == trim_oracle(pts, n, scale));
  }
  // Large enough to force tree rebuilds.
  const auto big = wpd::testing::plane(600, 8);
  CHECK(trim_indices(big, 100) == trim_oracle(big, 100));
}

TEST_CASE("trimming preconditions") {
  const std::vector<Point3> pts{{0, 0, 0}, {1, 0, 0}};
  WPD_CHECK_ERROR(trim_indices(pts, 3), ErrorKind::InvalidArgument, "cannot trim below input size");
  WPD_CHECK_ERROR(trim_indices(pts, 0), ErrorKind::InvalidArgument, "target count must be positive");
}

// ------------------------------------------------------------------ normals

TEST_CASE("normal of a flat patch") {
  std::vector<Point3> pts;
  for (int i = 0; i < 9; ++i) pts.emplace_back(i % 3, i / 3 + 0.1 * i, 2.5);
  const auto n = estimate_normal(pts);
  CHECK(std::abs(n.x()) < 1e-12);
  CHECK(std::abs(n.y()) < 1e-12);
  CHECK(n.z() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("normal of a noisy plane stays within half a degree") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1), dz(-1e-3, 1e-3);
  for (int t = 0; t < 20; ++t) {
    std::vector<Point3> pts;
    for (int i = 0; i < 30; ++i) pts.emplace_back(u(rng), u(rng), dz(rng));
    const auto n = estimate_normal(pts);
    CHECK(std::acos(std::min(1.0, n.z())) < 0.5 * kPi / 180.0);
  }
}

TEST_CASE("normal of a triangle and the sign rule") {
  const std::vector<Point3> tri{{1, 0, 0}, {0, 2, 0}, {0, 0, 3}};
  const Eigen::Vector3d geo = (tri[1] - tri[0]).cross(tri[2] - tri[0]).normalized();
  const auto n = estimate_normal(tri);
  CHECK(std::abs(n.dot(geo)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(n.z() > 0);

  // z-component zero: sign from y, then x.
  const std::vector<Point3> wall_y{{0, 1, 0}, {1, 1, 0}, {0, 1, 1}, {1, 1, 1}};
  CHECK(estimate_normal(wall_y).y() == doctest::Approx(1.0));
  const std::vector<Point3> wall_x{{3, 0, 0}, {3, 1, 0}, {3, 0, 1}, {3, 1, 1}};
  CHECK(estimate_normal(wall_x).x() == doctest::Approx(1.0));
}

TEST_CASE("degenerate neighborhoods are rejected") {
  const std::vector<Point3> line{{0, 0, 0}, {1, 1, 1}, {2, 2, 2}, {3, 3, 3}};
  WPD_CHECK_ERROR(estimate_normal(line), ErrorKind::InvalidArgument, "degenerate neighborhood");
  const std::vector<Point3> two{{0, 0, 0}, {1, 0, 0}};
  WPD_CHECK_ERROR(estimate_normal(two), ErrorKind::InvalidArgument, "degenerate neighborhood");
  const std::vector<Point3> same(5, Point3(1, 2, 3));
  WPD_CHECK_ERROR(estimate_normal(same), ErrorKind::InvalidArgument, "degenerate neighborhood");
}

TEST_CASE("frames are orthonormal") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  for (int t = 0; t < 200; ++t) {
    const Eigen::Vector3d n(g(rng), g(rng), g(rng));
    const auto f = make_frame(Point3(g(rng), g(rng), g(rng)), n);
    CHECK(f.normal.norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(f.e1.norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(f.e2.norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(f.e1.dot(f.e2)) < 1e-9);
    CHECK(std::abs(f.e1.dot(f.normal)) < 1e-9);
    CHECK(std::abs(f.e2.dot(f.normal)) < 1e-9);
    CHECK(f.e1.cross(f.e2).dot(f.normal) > 0);
  }
}

// --------------------------------------------------------------- projection

TEST_CASE("in-plane projection is an isometry") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1, 1);
  const Eigen::Matrix3d R = rotation(5);
  const Point3 c(0.3, -0.2, 0.9);
  std::vector<Point3> nbrs;
  for (int i = 0; i < 10; ++i) nbrs.push_back(c + R * Point3(u(rng), u(rng), 0.0));
  const auto frame = make_frame(c, R.col(2));
  const auto tn = project_to_tangent(c, nbrs, frame);
  for (std::size_t i = 0; i < nbrs.size(); ++i) {
    CHECK(tn.neighbors2d[i].norm() == doctest::Approx((nbrs[i] - c).norm()).epsilon(1e-12));
    for (std::size_t j = 0; j < nbrs.size(); ++j) {
      CHECK((tn.neighbors2d[i] - tn.neighbors2d[j]).norm() ==
            doctest::Approx((nbrs[i] - nbrs[j]).norm()).epsilon(1e-12));
    }
  }
}

TEST_CASE("regular hexagon projects to 60 degree steps with a closed cell") {
  const Eigen::Matrix3d R = rotation(11);
  const Point3 c(1, 2, 3);
  std::vector<Point3> nbrs;
  for (const auto& p : ring_points(6, 1.0)) nbrs.push_back(c + R * p);
  std::vector<Point3> all{c};
  all.insert(all.end(), nbrs.begin(), nbrs.end());
  const auto tn = project_to_tangent(c, nbrs, make_frame(c, estimate_normal(all)));
  CHECK(tn.cell_closed);
  CHECK(tn.cell_in_hull);
  CHECK(tn.ring.size() == 6);
  const double a0 = std::atan2(tn.neighbors2d[0].y(), tn.neighbors2d[0].x());
  for (const auto& q : tn.neighbors2d) {
    CHECK(q.norm() == doctest::Approx(1.0).epsilon(1e-12));
    const double steps = (std::atan2(q.y(), q.x()) - a0) / (kPi / 3.0);
    CHECK(std::abs(steps - std::round(steps)) < 1e-9);
  }
}

TEST_CASE("a half-disk neighborhood leaves the cell open") {
  std::vector<Point3> nbrs;
  for (int i = 0; i <= 6; ++i) nbrs.emplace_back(std::cos(kPi * i / 6), std::sin(kPi * i / 6), 0);
  const auto tn = flat(nbrs);
  CHECK_FALSE(tn.cell_closed);
  CHECK(tn.ring.empty());
  CHECK(tn.cell.empty());
  WPD_CHECK_ERROR(cotangent_weights(tn), ErrorKind::InvalidArgument, "boundary point, no weights");
  WPD_CHECK_ERROR(voronoi_centroid(tn), ErrorKind::InvalidArgument, "boundary point, no weights");
}

TEST_CASE("projection needs three spanning neighbors") {
  const std::vector<Point3> line{{1, 0, 0}, {2, 0, 0}, {-1, 0, 0}, {-3, 0, 0}};
  WPD_CHECK_ERROR(flat(line), ErrorKind::InvalidArgument, "degenerate projection");
  const std::vector<Point3> two{{1, 0, 0}, {0, 1, 0}};
  WPD_CHECK_ERROR(flat(two), ErrorKind::InvalidArgument, "degenerate projection");
}

TEST_CASE("closed cell iff the origin is strictly inside the hull") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int t = 0; t < 500; ++t) {
    std::vector<Point2> pts;
    const int m = 3 + t % 6;
    for (int i = 0; i < m; ++i) pts.emplace_back(u(rng) + 0.4, u(rng));
    const bool got = strictly_inside_hull(pts);
    CHECK(got == !oracle::origin_cell(pts).empty());
  }
}

TEST_CASE("the Delaunay star matches a brute-force Voronoi cell") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(-1, 1);
  int closed = 0;
  for (int t = 0; t < 300; ++t) {
    std::vector<Point3> nbrs;
    for (int i = 0; i < 12; ++i) nbrs.emplace_back(u(rng), u(rng), 0.0);
    const auto tn = flat(nbrs);
    std::vector<oracle::P2> sites;
    for (const auto& q : tn.neighbors2d) sites.push_back(q);
    const auto cell = oracle::origin_cell(sites);
    REQUIRE(tn.cell_closed == !cell.empty());
    if (!tn.cell_closed) continue;
    ++closed;
    CHECK(tn.cell_area() == doctest::Approx(oracle::polygon_area(cell)).epsilon(1e-9));
    bool in_hull = true;
    for (const auto& v : tn.cell) in_hull &= oracle::in_hull(v, sites, 1e-9);
    CHECK(tn.cell_in_hull == in_hull);
    // Empty circumcircles.
    for (std::size_t i = 0; i < tn.ring.size(); ++i) {
      const auto& c = tn.cell[i];
      for (const auto& q : tn.neighbors2d) CHECK((q - c).norm() >= c.norm() * (1 - 1e-9));
    }
  }
  CHECK(closed > 100);
}

// ----------------------------------------------------------------- weights

TEST_CASE("regular hexagon weights") {
  const auto tn = flat(ring_points(6, 1.0, 0.3));
  const auto w = cotangent_weights(tn);
  REQUIRE(w.w.size() == 6);
  CHECK_FALSE(w.uniform_fallback);
  for (double x : w.w) {
    CHECK(x == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-12));
    CHECK(x / w.sum == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
  }
  CHECK((displace(tn, w) - Point3::Zero()).norm() < 1e-12);
  CHECK(voronoi_centroid(tn).norm() < 1e-12);
}

TEST_CASE("square neighborhood: 45 degree opposite angles, unit weights") {
  const auto tn = flat(ring_points(4, 1.0));
  const auto w = cotangent_weights(tn);
  REQUIRE(w.w.size() == 4);
  CHECK_FALSE(w.uniform_fallback);
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& q = tn.neighbors2d[tn.ring[i]];
    const auto& next = tn.neighbors2d[tn.ring[(i + 1) % 4]];
    CHECK(oracle::angle(next, oracle::P2::Zero(), q) == doctest::Approx(kPi / 4));
    CHECK(w.raw[i] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(w.w[i] / w.sum == doctest::Approx(0.25).epsilon(1e-12));
  }
  CHECK(displace(tn, w).norm() < 1e-12);
}

TEST_CASE("a degenerate ring falls back to uniform weights") {
  // Every star triangle is flat, so every cotangent collapses to zero.
  TangentNeighborhood tn;
  tn.cell_closed = true;
  tn.neighbors2d = {{1, 0}, {3, 0}, {-2, 0}};
  tn.ring = {0, 1, 2};
  const auto w = cotangent_weights(tn);
  CHECK(w.uniform_fallback);
  CHECK(w.sum == 3.0);
  for (double x : w.w) CHECK(x == 1.0);
  CHECK(displace(tn, w).x() == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("clamped weights never vanish on a real star") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int t = 0; t < 2000; ++t) {
    std::vector<Point3> nbrs;
    for (int i = 0; i < 3 + t % 8; ++i) nbrs.emplace_back(u(rng), u(rng), 0.0);
    const auto tn = flat(nbrs);
    if (!tn.cell_closed) continue;
    const auto w = cotangent_weights(tn);
    CHECK_FALSE(w.uniform_fallback);
    CHECK(w.sum > 0);
    for (std::size_t i = 0; i < w.w.size(); ++i) CHECK(w.w[i] == std::max(0.0, w.raw[i]));
  }
}

TEST_CASE("random 8-neighbor weights match the angle oracle") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  int tested = 0;
  while (tested < 50) {
    std::vector<Point3> nbrs;
    for (int i = 0; i < 8; ++i) nbrs.emplace_back(u(rng), u(rng), 0.0);
    const auto tn = flat(nbrs);
    if (!tn.cell_closed) continue;
    ++tested;
    const auto w = cotangent_weights(tn);
    const auto m = tn.ring.size();
    for (std::size_t i = 0; i < m; ++i) {
      const auto& q = tn.neighbors2d[tn.ring[i]];
      const auto& next = tn.neighbors2d[tn.ring[(i + 1) % m]];
      const auto& prev = tn.neighbors2d[tn.ring[(i + m - 1) % m]];
      const double a = oracle::angle(next, oracle::P2::Zero(), q);
      const double b = oracle::angle(prev, oracle::P2::Zero(), q);
      const double want = 0.5 * (1.0 / std::tan(a) + 1.0 / std::tan(b));
      CHECK(w.raw[i] == doctest::Approx(want).epsilon(1e-9));
      // Fan triangle across spoke i has area w |p|^2 / 4.
      const auto& c0 = tn.cell[(i + m - 1) % m];
      const auto& c1 = tn.cell[i];
      CHECK(0.5 * oracle::cross(c0, c1) == doctest::Approx(w.raw[i] * q.squaredNorm() / 4).epsilon(1e-9));
    }
  }
}

// ------------------------------------------------------------ displacement

TEST_CASE("displacement with fixed weights translates with the neighbors") {
  const Point3 c(0.5, 0.5, 2.0);
  const auto frame = make_frame(c, Eigen::Vector3d(0.2, -0.1, 1.0));
  std::vector<Point3> nbrs;
  for (const auto& p : ring_points(6, 1.0, 0.1)) nbrs.push_back(frame.lift({p.x() * 1.3, p.y()}));
  const auto tn = project_to_tangent(c, nbrs, frame);
  const auto w = cotangent_weights(tn);
  auto shifted = tn;
  const double delta = 0.125;
  for (auto& q : shifted.neighbors2d) q.x() += delta;
  const Point3 moved = displace(shifted, w) - displace(tn, w);
  CHECK((moved - delta * frame.e1).norm() < 1e-12);
}

TEST_CASE("asymmetric displacement equals the hand-computed convex combination") {
  const Point3 c(1, -1, 0.5);
  const auto frame = make_frame(c, Eigen::Vector3d(0.3, 0.4, 1.0));
  const std::vector<oracle::P2> uv{{1.0, 0.1}, {0.4, 0.9}, {-0.6, 0.8}, {-1.1, -0.1}, {-0.3, -0.9}, {0.7, -0.7}};
  std::vector<Point3> nbrs;
  for (const auto& p : uv) nbrs.push_back(frame.lift(p));
  const auto tn = project_to_tangent(c, nbrs, frame);
  REQUIRE(tn.cell_closed);
  REQUIRE(tn.ring.size() == 6);
  const auto w = cotangent_weights(tn);
  oracle::P2 acc = oracle::P2::Zero();
  double total = 0.0;
  for (std::size_t i = 0; i < 6; ++i) {
    const auto& q = uv[tn.ring[i]];
    const auto& next = uv[tn.ring[(i + 1) % 6]];
    const auto& prev = uv[tn.ring[(i + 5) % 6]];
    const double wi = std::max(0.0, 0.5 * (1 / std::tan(oracle::angle(next, {0, 0}, q)) +
                                          1 / std::tan(oracle::angle(prev, {0, 0}, q))));
    acc += wi * q;
    total += wi;
  }
  acc /= total;
  const Point3 want = c + acc.x() * frame.e1 + acc.y() * frame.e2;
  CHECK((displace(tn, w) - want).norm() < 1e-12);
  CHECK(std::abs((displace(tn, w) - c).dot(frame.normal)) < 1e-12);
}

TEST_CASE("cell centroid matches the shoelace centroid of the brute-force cell") {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> u(-1, 1);
  int tested = 0;
  while (tested < 100) {
    std::vector<Point3> nbrs;
    for (int i = 0; i < 16; ++i) nbrs.emplace_back(u(rng), u(rng), 0.0);
    const auto tn = flat(nbrs);
    if (!tn.cell_closed) continue;
    if (!tn.cell_in_hull) {
      WPD_CHECK_ERROR(voronoi_centroid(tn), ErrorKind::InvalidArgument, "cell reaches past");
      continue;
    }
    ++tested;
    std::vector<oracle::P2> sites(tn.neighbors2d.begin(), tn.neighbors2d.end());
    const auto cell = oracle::origin_cell(sites);
    const auto want = oracle::polygon_centroid(cell);
    const auto got = voronoi_centroid(tn);
    CHECK(got.x() == doctest::Approx(want.x()).epsilon(1e-9).scale(1.0));
    CHECK(got.y() == doctest::Approx(want.y()).epsilon(1e-9).scale(1.0));
    CHECK(got.z() == 0.0);
  }
}

// ---------------------------------------------------------------- smoothing

TEST_CASE("smoothing a jittered grid with k = 8 cuts d_local by at least 30%") {
  const auto pts = wpd::testing::jittered_grid(30, 30, 0.2, 0);
  SmoothOptions opt;
  opt.k = 8;
  opt.iterations = 5;
  const auto out = smooth(as_cloud(pts), opt);
  const double before = interior_d_local(pts);
  const double after = interior_d_local(out.points);
  CHECK(after <= 0.7 * before);
}

TEST_CASE("a regular grid is a fixpoint") {
  const auto pts = wpd::testing::grid(12, 12);
  for (std::size_t k : {8u, 16u}) {
    SmoothPassStats stats;
    const auto out = smooth_pass(pts, k, {}, &stats);
    for (std::size_t i = 0; i < pts.size(); ++i) CHECK((out[i] - pts[i]).norm() < 1e-9);
    CHECK(stats.moved + stats.unclosed + stats.degenerate + stats.edge_frozen == pts.size());
    CHECK(stats.unclosed >= 44);
  }
}

TEST_CASE("all-edge clouds smooth like unlabeled ones") {
  const auto pts = wpd::testing::jittered_grid(15, 15, 0.2, 3);
  const std::vector<PointClass> edges(pts.size(), PointClass::Edge);
  SmoothPassStats stats;
  const auto labeled = smooth_pass(pts, 8, edges, &stats);
  CHECK(labeled == smooth_pass(pts, 8, {}));
  CHECK(stats.edge_frozen == 0);
  CHECK(stats.moved > 0);
}

TEST_CASE("edge points next to normal points are frozen") {
  const auto pts = wpd::testing::jittered_grid(15, 15, 0.2, 4);
  std::vector<PointClass> classes(pts.size(), PointClass::Normal);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i % 15 == 7) classes[i] = PointClass::Edge;  // a column of edge points
  }
  SmoothPassStats stats;
  const auto out = smooth_pass(pts, 8, classes, &stats);
  const KdTree tree(pts);
  std::size_t frozen = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    std::vector<std::size_t> ids;
    for (const auto& nb : tree.knn_of(i, 8)) ids.push_back(nb.index);
    if (edge_freeze_predicate(i, classes, ids)) {
      ++frozen;
      CHECK(out[i] == pts[i]);
    }
  }
  CHECK(frozen == 15);
  CHECK(stats.edge_frozen == frozen);
}

TEST_CASE("smoothing preserves count and order, confines moves to tangent planes") {
  const auto pts = wpd::testing::sphere(3000, 12);
  const std::size_t k = 16;
  std::vector<SmoothPassStats> stats;
  SmoothOptions opt;
  opt.k = k;
  opt.iterations = 2;
  PointCloud in = as_cloud(pts);
  in.colors.assign(pts.size(), Rgb{1, 2, 3});
  const auto out = smooth(in, opt, &stats);
  CHECK(out.size() == pts.size());
  CHECK(out.colors == in.colors);
  CHECK(stats.size() == 2);

  const auto one = smooth_pass(pts, k, {});
  std::size_t moved = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto nn = oracle::knn(pts, pts[i], k, i);
    std::vector<Point3> local{pts[i]};
    std::vector<oracle::P2> sites;
    for (const auto& h : nn) local.push_back(pts[h.index]);
    const auto n = estimate_normal(local);
    const Eigen::Vector3d off = one[i] - pts[i];
    CHECK(std::abs(off.dot(n)) < 1e-7);
    if (off.norm() == 0.0) continue;
    ++moved;
    // New position stays inside the hull of the projected neighbors.
    const auto frame = make_frame(pts[i], n);
    for (std::size_t j = 1; j < local.size(); ++j) sites.push_back(frame.project(local[j]));
    CHECK(oracle::in_hull(frame.project(one[i]), sites, 1e-9));
  }
  CHECK(moved > pts.size() / 2);
}

TEST_CASE("ring-average moves are convex combinations") {
  const auto pts = wpd::testing::jittered_grid(12, 12, 0.25, 9);
  const auto out = smooth_pass(pts, 8, {}, nullptr, Displacement::RingAverage);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (out[i] == pts[i]) continue;
    std::vector<oracle::P2> sites;
    for (const auto& h : oracle::knn(pts, pts[i], 8, i)) {
      sites.emplace_back(pts[h.index].x() - pts[i].x(), pts[h.index].y() - pts[i].y());
    }
    CHECK(oracle::in_hull({out[i].x() - pts[i].x(), out[i].y() - pts[i].y()}, sites, 1e-9));
  }
}

TEST_CASE("open-cell points keep their exact positions across passes") {
  auto pts = wpd::testing::jittered_grid(14, 14, 0.2, 5);
  for (int pass = 0; pass < 3; ++pass) {
    const auto out = smooth_pass(pts, 8, {});
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const auto sites = oracle::tangent_sites(pts, i, 8);
      if (oracle::origin_cell(sites).empty()) CHECK(out[i] == pts[i]);
    }
    pts = out;
  }
}

TEST_CASE("interior d_local never rises across passes on jittered grids") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto pts = wpd::testing::jittered_grid(30, 30, 0.2, seed);
    double prev = interior_d_local(pts);
    const double start = prev;
    for (int pass = 0; pass < 5; ++pass) {
      pts = smooth_pass(pts, 16, {});
      const double now = interior_d_local(pts);
      CHECK_MESSAGE(now <= prev + 1e-9, "seed " << seed << " pass " << pass);
      prev = now;
    }
    CHECK(prev <= 0.7 * start);
  }
}

TEST_CASE("one pass commutes with rigid motions") {
  const auto base = wpd::testing::jittered_grid(14, 14, 0.2, 6);
  const Eigen::Matrix3d R = rotation(17);
  const Eigen::Vector3d t(3.0, -2.0, 0.5);
  std::vector<Point3> moved;
  for (const auto& p : base) moved.push_back(R * p + t);
  const auto a = smooth_pass(base, 12, {});
  const auto b = smooth_pass(moved, 12, {});
  for (std::size_t i = 0; i < base.size(); ++i) CHECK(((R * a[i] + t) - b[i]).norm() < 1e-6);
}

TEST_CASE("passes do not depend on the thread count") {
  const auto pts = wpd::testing::sphere(4000, 2);
  ::setenv("WPD_THREADS", "1", 1);
  const auto one = smooth_pass(pts, 16, {});
  ::setenv("WPD_THREADS", "4", 1);
  const auto four = smooth_pass(pts, 16, {});
  ::unsetenv("WPD_THREADS");
  CHECK(one == four);
}

TEST_CASE("smoothing needs more points than k") {
  const auto pts = wpd::testing::grid(3, 3);
  WPD_CHECK_ERROR(smooth_pass(pts, 9, {}), ErrorKind::InvalidArgument, "more than k points");
  WPD_CHECK_ERROR(smooth_pass(pts, 2, {}), ErrorKind::InvalidArgument, "k >= 3");
}
