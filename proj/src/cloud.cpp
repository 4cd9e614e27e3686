#include "shapeinv/cloud.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace shapeinv {

PointCloud PointCloud::from_matrix(const Mat& m) {
  if (m.cols() != 3) {
    throw Error(ErrorCode::ShapeMismatch,
                "expected n x 3 matrix, got " + std::to_string(m.cols()) + " columns");
  }
  std::vector<Vec3> pts(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    pts[static_cast<std::size_t>(i)] = Vec3(m(i, 0), m(i, 1), m(i, 2));
  }
  return PointCloud(std::move(pts));
}

Mat PointCloud::to_matrix() const {
  Mat m(static_cast<Eigen::Index>(points_.size()), 3);
  for (std::size_t i = 0; i < points_.size(); ++i) {
    m.row(static_cast<Eigen::Index>(i)) = points_[i].transpose();
  }
  return m;
}

bool PointCloud::all_finite() const {
  return std::all_of(points_.begin(), points_.end(),
                     [](const Vec3& p) { return p.allFinite(); });
}

bool operator==(const PointCloud& a, const PointCloud& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) return false;
  }
  return true;
}

bool IndexSet::contains(std::size_t i) const {
  return std::binary_search(indices.begin(), indices.end(), i);
}

bool IndexSet::valid_for(std::size_t parent_size) const {
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= parent_size) return false;
    if (i > 0 && indices[i] <= indices[i - 1]) return false;
  }
  return true;
}

IndexSet index_set_from_flags(std::span<const unsigned char> flags) {
  IndexSet out;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (flags[i]) out.indices.push_back(i);
  }
  return out;
}

PointCloud gather(const PointCloud& cloud, const IndexSet& subset) {
  std::vector<Vec3> pts;
  pts.reserve(subset.size());
  for (std::size_t i : subset.indices) pts.push_back(cloud[i]);
  return PointCloud(std::move(pts));
}

void require_finite(const PointCloud& cloud, std::string_view what) {
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (!cloud[i].allFinite()) {
      throw Error(ErrorCode::NonFinite,
                  std::string(what) + ": point " + std::to_string(i) + " is not finite");
    }
  }
}

void require_valid(const PointCloud& cloud, std::string_view what) {
  if (cloud.empty()) throw Error(ErrorCode::EmptyCloud, std::string(what) + " has no points");
  require_finite(cloud, what);
}

PointCloud translated(const PointCloud& cloud, const Vec3& offset) {
  return transformed(cloud, Eigen::Matrix3d::Identity(), offset);
}

PointCloud scaled(const PointCloud& cloud, double s) {
  std::vector<Vec3> pts(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) pts[i] = cloud[i] * s;
  return PointCloud(std::move(pts));
}

PointCloud transformed(const PointCloud& cloud, const Eigen::Matrix3d& rotation,
                       const Vec3& offset) {
  std::vector<Vec3> pts(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) pts[i] = rotation * cloud[i] + offset;
  return PointCloud(std::move(pts));
}

}  // namespace shapeinv
