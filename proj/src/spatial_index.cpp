#include "shapeinv/spatial_index.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace shapeinv {

KdTree::KdTree(const PointCloud& cloud) : cloud_(cloud), points_(cloud.points()) {
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / kLeafSize + 1);
    root_ = build(0, static_cast<std::uint32_t>(points_.size()));
  }
}

std::uint32_t KdTree::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back(Node{begin, end, kNone, kNone, 0, 0.0});
  if (end - begin <= kLeafSize) return id;

  Vec3 lo = points_[order_[begin]];
  Vec3 hi = lo;
  for (std::uint32_t i = begin + 1; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi[axis] == lo[axis]) return id;  // all coincident: keep as a leaf

  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     return points_[a][axis] < points_[b][axis];
                   });
  const double split = points_[order_[mid]][axis];
  const std::uint32_t left = build(begin, mid);
  const std::uint32_t right = build(mid, end);
  Node& n = nodes_[id];
  n.left = left;
  n.right = right;
  n.axis = axis;
  n.split = split;
  return id;
}

void KdTree::search(std::uint32_t node_id, const Vec3& q, std::size_t k,
                    std::vector<Neighbor>& heap) const {
  const Node& node = nodes_[node_id];
  if (node.left == kNone) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const std::uint32_t idx = order_[i];
      const Neighbor cand{idx, squared_distance(q, points_[idx])};
      if (heap.size() < k) {
        heap.push_back(cand);
        std::push_heap(heap.begin(), heap.end(), neighbor_before);
      } else if (neighbor_before(cand, heap.front())) {
        std::pop_heap(heap.begin(), heap.end(), neighbor_before);
        heap.back() = cand;
        std::push_heap(heap.begin(), heap.end(), neighbor_before);
      }
    }
    return;
  }
  // Left holds coordinates <= split, right holds >= split.
  const double diff = q[node.axis] - node.split;
  const std::uint32_t near = diff < 0.0 ? node.left : node.right;
  const std::uint32_t far = diff < 0.0 ? node.right : node.left;
  search(near, q, k, heap);
  // Equal bound may still hide a lower-index tie, so only prune on strict >.
  if (heap.size() < k || diff * diff <= heap.front().dist2) {
    search(far, q, k, heap);
  }
}

std::vector<Neighbor> KdTree::knn(const Vec3& query, std::size_t k) const {
  if (k == 0 || k > points_.size()) {
    throw Error(ErrorCode::KTooLarge, "k=" + std::to_string(k) + " for cloud of " +
                                          std::to_string(points_.size()) + " points");
  }
  std::vector<Neighbor> heap;
  heap.reserve(k + 1);
  search(root_, query, k, heap);
  std::sort_heap(heap.begin(), heap.end(), neighbor_before);
  return heap;
}

Neighbor KdTree::nearest(const Vec3& query) const { return knn(query, 1).front(); }

KdTree build_index(const PointCloud& cloud) {
  require_valid(cloud, "index cloud");
  return KdTree(cloud);
}

std::vector<Neighbor> knn(const KdTree& index, const Vec3& query, std::size_t k) {
  return index.knn(query, k);
}

}  // namespace shapeinv
