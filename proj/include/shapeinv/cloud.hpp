#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "shapeinv/error.hpp"

namespace shapeinv {

using Vec3 = Eigen::Vector3d;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

/// Ordered list of 3D points. Index order is part of the value: masks and
/// gradients refer to points by position.
class PointCloud {
 public:
  PointCloud() = default;
  explicit PointCloud(std::vector<Vec3> points) : points_(std::move(points)) {}
  PointCloud(std::initializer_list<Vec3> points) : points_(points) {}

  /// Builds a cloud from an n x 3 matrix (one point per row).
  static PointCloud from_matrix(const Mat& m);
  Mat to_matrix() const;

  std::size_t size() const noexcept { return points_.size(); }
  bool empty() const noexcept { return points_.empty(); }

  const Vec3& operator[](std::size_t i) const { return points_[i]; }
  Vec3& operator[](std::size_t i) { return points_[i]; }

  const std::vector<Vec3>& points() const noexcept { return points_; }
  auto begin() const { return points_.begin(); }
  auto end() const { return points_.end(); }

  void push_back(const Vec3& p) { points_.push_back(p); }
  void reserve(std::size_t n) { points_.reserve(n); }

  bool all_finite() const;

  friend bool operator==(const PointCloud& a, const PointCloud& b);

 private:
  std::vector<Vec3> points_;
};

/// Per-point 3D gradient, same layout as the cloud it refers to.
using CloudGrad = std::vector<Vec3>;

inline CloudGrad zero_grad(std::size_t n) { return CloudGrad(n, Vec3::Zero()); }

/// Sorted, deduplicated indices into a parent cloud.
struct IndexSet {
  std::vector<std::size_t> indices;

  std::size_t size() const noexcept { return indices.size(); }
  bool empty() const noexcept { return indices.empty(); }
  bool contains(std::size_t i) const;
  /// True when `indices` is strictly increasing and every entry < parent_size.
  bool valid_for(std::size_t parent_size) const;

  friend bool operator==(const IndexSet&, const IndexSet&) = default;
};

/// Builds an IndexSet from a 0/1 membership vector.
IndexSet index_set_from_flags(std::span<const unsigned char> flags);

/// Points of `cloud` at `subset`, in subset order.
PointCloud gather(const PointCloud& cloud, const IndexSet& subset);

/// Throws EmptyCloud / NonFinite. `what` names the argument in the message.
void require_valid(const PointCloud& cloud, std::string_view what);
void require_finite(const PointCloud& cloud, std::string_view what);

PointCloud translated(const PointCloud& cloud, const Vec3& offset);
PointCloud scaled(const PointCloud& cloud, double s);
PointCloud transformed(const PointCloud& cloud, const Eigen::Matrix3d& rotation,
                       const Vec3& offset = Vec3::Zero());

inline double squared_distance(const Vec3& a, const Vec3& b) {
  const double dx = a.x() - b.x();
  const double dy = a.y() - b.y();
  const double dz = a.z() - b.z();
  return dx * dx + dy * dy + dz * dz;
}

}  // namespace shapeinv
