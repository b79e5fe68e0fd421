#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "wpd/cloud.hpp"

namespace wpd {

struct Neighbor {
  std::size_t index;
  double distance;
};

/// Exact k-d tree over an immutable snapshot of points.
///
/// All queries are exact. Ties in distance are broken by ascending point
/// index, so results depend only on the snapshot and the query.
class KdTree {
 public:
  explicit KdTree(std::span<const Point3> points, std::size_t leaf_size = 10);

  std::size_t size() const noexcept { return points_.size(); }
  const Point3& point(std::size_t i) const { return points_[slot_of_[i]]; }

  /// The k nearest points to `q`, ascending by (distance, index).
  /// `skip` (if < size()) is left out of the result, e.g. the query point itself.
  std::vector<Neighbor> knn(const Point3& q, std::size_t k,
                            std::size_t skip = static_cast<std::size_t>(-1)) const;

  /// knn(point(i), k, i).
  std::vector<Neighbor> knn_of(std::size_t i, std::size_t k) const {
    return knn(point(i), k, i);
  }

  /// Nearest neighbor among points with `removed[i] == 0`, excluding `skip`.
  /// Returns index == size() when nothing qualifies.
  Neighbor nearest_alive(const Point3& q, std::span<const std::uint8_t> removed,
                         std::size_t skip) const;

  /// Indices of all points strictly closer than `r` to `q`, ascending.
  std::vector<std::size_t> radius_query(const Point3& q, double r) const;

 private:
  struct Node {
    Eigen::Vector3d lo, hi;
    std::uint32_t begin, end;
    std::uint32_t left = 0, right = 0;  // 0 marks a leaf (root is never a child)
  };

  std::uint32_t build(std::uint32_t begin, std::uint32_t end);

  template <class Accept>
  void search(const Point3& q, std::size_t k, Accept&& accept, std::vector<Neighbor>& out) const;

  std::size_t leaf_size_;
  std::vector<Point3> points_;        // reordered to leaf order
  std::vector<std::size_t> index_;    // slot -> original index
  std::vector<std::size_t> slot_of_;  // original index -> slot
  std::vector<Node> nodes_;
};

}  // namespace wpd
