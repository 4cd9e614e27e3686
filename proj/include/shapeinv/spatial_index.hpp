#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "shapeinv/cloud.hpp"

namespace shapeinv {

struct Neighbor {
  std::size_t index;
  double dist2;  // squared Euclidean distance

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Strict ordering used everywhere a neighbor list is ranked: nearer first,
/// lower point index on equal distance.
inline bool neighbor_before(const Neighbor& a, const Neighbor& b) {
  return a.dist2 < b.dist2 || (a.dist2 == b.dist2 && a.index < b.index);
}

/// Static kd-tree over a copy of a cloud. Answers exact k-nearest-neighbor
/// queries whose results (including tie order) equal a linear scan.
/// Read-only after construction, so concurrent queries are safe.
class KdTree {
 public:
  explicit KdTree(const PointCloud& cloud);

  std::size_t size() const noexcept { return points_.size(); }
  const PointCloud& cloud() const noexcept { return cloud_; }

  /// k nearest points, ascending by (dist2, index). Throws KTooLarge.
  std::vector<Neighbor> knn(const Vec3& query, std::size_t k) const;
  Neighbor nearest(const Vec3& query) const;

 private:
  struct Node {
    // Leaf when left == right == kNone: owns order_[begin, end).
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    std::uint32_t left = kNone;
    std::uint32_t right = kNone;
    int axis = 0;
    double split = 0.0;
  };
  static constexpr std::uint32_t kNone = 0xffffffffu;
  static constexpr std::uint32_t kLeafSize = 8;

  std::uint32_t build(std::uint32_t begin, std::uint32_t end);
  void search(std::uint32_t node, const Vec3& q, std::size_t k,
              std::vector<Neighbor>& heap) const;

  PointCloud cloud_;
  std::vector<Vec3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
  std::uint32_t root_ = kNone;
};

/// Validates the cloud (EmptyCloud, NonFinite) and builds the index.
KdTree build_index(const PointCloud& cloud);

std::vector<Neighbor> knn(const KdTree& index, const Vec3& query, std::size_t k);

}  // namespace shapeinv
