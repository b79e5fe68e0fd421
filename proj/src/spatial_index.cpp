#include "wpd/spatial_index.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

#include "wpd/error.hpp"

namespace wpd {
namespace {

double box_distance2(const Point3& q, const Eigen::Vector3d& lo, const Eigen::Vector3d& hi) {
  double d2 = 0.0;
  for (int a = 0; a < 3; ++a) {
    double d = 0.0;
    if (q[a] < lo[a]) {
      d = lo[a] - q[a];
    } else if (q[a] > hi[a]) {
      d = q[a] - hi[a];
    }
    d2 += d * d;
  }
  return d2;
}

// Same summation order as box_distance2 so a box bound never exceeds the
// distance of a point inside it.
double distance2(const Point3& a, const Point3& b) {
  double d2 = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double d = a[i] - b[i];
    d2 += d * d;
  }
  return d2;
}

// Ascending (d2, index) buffer capped at k entries.
struct Best {
  std::size_t k;
  std::vector<std::pair<double, std::size_t>> items;

  bool full() const { return items.size() == k; }
  double worst() const {
    return full() ? items.back().first : std::numeric_limits<double>::infinity();
  }

  void offer(double d2, std::size_t idx) {
    const std::pair<double, std::size_t> cand{d2, idx};
    if (full() && !(cand < items.back())) return;
    auto pos = std::upper_bound(items.begin(), items.end(), cand);
    items.insert(pos, cand);
    if (items.size() > k) items.pop_back();
  }
};

}  // namespace

KdTree::KdTree(std::span<const Point3> points, std::size_t leaf_size)
    : leaf_size_(std::max<std::size_t>(leaf_size, 1)) {
  if (points.empty()) fail("cannot index an empty point set");
  if (points.size() >= std::numeric_limits<std::uint32_t>::max()) fail("too many points to index");
  points_.assign(points.begin(), points.end());
  index_.resize(points_.size());
  std::iota(index_.begin(), index_.end(), std::size_t{0});
  nodes_.reserve(2 * points_.size() / leaf_size_ + 2);
  build(0, static_cast<std::uint32_t>(points_.size()));

  std::vector<Point3> reordered(points_.size());
  slot_of_.resize(points_.size());
  for (std::size_t s = 0; s < index_.size(); ++s) {
    reordered[s] = points[index_[s]];
    slot_of_[index_[s]] = s;
  }
  points_ = std::move(reordered);
}

std::uint32_t KdTree::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back({});
  Eigen::Vector3d lo = points_[index_[begin]];
  Eigen::Vector3d hi = lo;
  for (auto i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[index_[i]]);
    hi = hi.cwiseMax(points_[index_[i]]);
  }
  nodes_[id].lo = lo;
  nodes_[id].hi = hi;
  nodes_[id].begin = begin;
  nodes_[id].end = end;

  if (end - begin <= leaf_size_) return id;
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi[axis] == lo[axis]) return id;  // all coincident

  const auto mid = begin + (end - begin) / 2;
  std::nth_element(index_.begin() + begin, index_.begin() + mid, index_.begin() + end,
                   [&](std::size_t a, std::size_t b) {
                     const double pa = points_[a][axis];
                     const double pb = points_[b][axis];
                     return pa < pb || (pa == pb && a < b);
                   });
  const auto left = build(begin, mid);
  const auto right = build(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

template <class Accept>
void KdTree::search(const Point3& q, std::size_t k, Accept&& accept,
                    std::vector<Neighbor>& out) const {
  Best best{k, {}};
  best.items.reserve(k + 1);

  auto visit = [&](auto&& self, std::uint32_t id) -> void {
    const Node& node = nodes_[id];
    if (node.left == 0) {
      for (auto s = node.begin; s < node.end; ++s) {
        const auto idx = index_[s];
        if (!accept(idx)) continue;
        best.offer(distance2(points_[s], q), idx);
      }
      return;
    }
    const double dl = box_distance2(q, nodes_[node.left].lo, nodes_[node.left].hi);
    const double dr = box_distance2(q, nodes_[node.right].lo, nodes_[node.right].hi);
    // Equal distances must still be explored: a tie may carry a lower index.
    if (dl <= dr) {
      if (dl <= best.worst()) self(self, node.left);
      if (dr <= best.worst()) self(self, node.right);
    } else {
      if (dr <= best.worst()) self(self, node.right);
      if (dl <= best.worst()) self(self, node.left);
    }
  };
  visit(visit, 0);

  out.clear();
  out.reserve(best.items.size());
  for (const auto& [d2, idx] : best.items) out.push_back({idx, std::sqrt(d2)});
}

std::vector<Neighbor> KdTree::knn(const Point3& q, std::size_t k, std::size_t skip) const {
  const std::size_t available = size() - (skip < size() ? 1 : 0);
  if (k == 0) fail("k must be at least 1");
  if (k > available) fail("insufficient points");
  std::vector<Neighbor> out;
  search(q, k, [skip](std::size_t idx) { return idx != skip; }, out);
  return out;
}

Neighbor KdTree::nearest_alive(const Point3& q, std::span<const std::uint8_t> removed,
                               std::size_t skip) const {
  std::vector<Neighbor> out;
  search(q, 1, [&](std::size_t idx) { return idx != skip && removed[idx] == 0; }, out);
  if (out.empty()) return {size(), std::numeric_limits<double>::infinity()};
  return out.front();
}

std::vector<std::size_t> KdTree::radius_query(const Point3& q, double r) const {
  if (!(r > 0.0)) fail("radius must be positive");
  const double r2 = r * r;
  std::vector<std::size_t> out;
  auto visit = [&](auto&& self, std::uint32_t id) -> void {
    const Node& node = nodes_[id];
    if (!(box_distance2(q, node.lo, node.hi) < r2)) return;
    if (node.left == 0) {
      for (auto s = node.begin; s < node.end; ++s) {
        if (distance2(points_[s], q) < r2) out.push_back(index_[s]);
      }
      return;
    }
    self(self, node.left);
    self(self, node.right);
  };
  visit(visit, 0);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace wpd
