#include "shapeinv/kernels.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace shapeinv::kernels {

namespace {

// Below this many output rows the thread fan-out costs more than it saves.
constexpr std::ptrdiff_t kParallelMin = 64;

inline Neighbor scan_nearest(const Vec3& q, const PointCloud& targets) {
  Neighbor best{0, std::numeric_limits<double>::infinity()};
  for (std::size_t j = 0; j < targets.size(); ++j) {
    const double d = squared_distance(q, targets[j]);
    if (d < best.dist2) best = {j, d};
  }
  return best;
}

inline double row_dist2(const Mat& rows, Eigen::Index i, Eigen::Index j) {
  double s = 0.0;
  for (Eigen::Index c = 0; c < rows.cols(); ++c) {
    const double d = rows(i, c) - rows(j, c);
    s += d * d;
  }
  return s;
}

}  // namespace

std::vector<Neighbor> nearest_neighbors(const PointCloud& queries, const PointCloud& targets) {
  const auto n = static_cast<std::ptrdiff_t>(queries.size());
  std::vector<Neighbor> out(queries.size());
#pragma omp parallel for schedule(static) if (n >= kParallelMin)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = scan_nearest(queries[static_cast<std::size_t>(i)], targets);
  }
  return out;
}

std::vector<std::vector<Neighbor>> batch_knn(const KdTree& index, const PointCloud& queries,
                                             std::size_t k) {
  const auto n = static_cast<std::ptrdiff_t>(queries.size());
  std::vector<std::vector<Neighbor>> out(queries.size());
  if (k == 0 || k > index.size()) {
    throw Error(ErrorCode::KTooLarge, "k=" + std::to_string(k) + " for cloud of " +
                                          std::to_string(index.size()) + " points");
  }
#pragma omp parallel for schedule(static) if (n >= kParallelMin)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = index.knn(queries[static_cast<std::size_t>(i)], k);
  }
  return out;
}

Mat pairwise_distances(const PointCloud& a, const PointCloud& b) {
  const auto n = static_cast<std::ptrdiff_t>(a.size());
  Mat out(n, static_cast<Eigen::Index>(b.size()));
#pragma omp parallel for schedule(static) if (n >= kParallelMin)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      out(i, static_cast<Eigen::Index>(j)) =
          std::sqrt(squared_distance(a[static_cast<std::size_t>(i)], b[j]));
    }
  }
  return out;
}

void update_min_dist(const Mat& rows, std::size_t picked, std::span<double> min_d) {
  const auto n = static_cast<std::ptrdiff_t>(min_d.size());
  const auto p = static_cast<Eigen::Index>(picked);
#pragma omp parallel for schedule(static) if (n >= 4 * kParallelMin)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const double d = row_dist2(rows, i, p);
    if (d < min_d[static_cast<std::size_t>(i)]) min_d[static_cast<std::size_t>(i)] = d;
  }
}

namespace serial {

std::vector<Neighbor> nearest_neighbors(const PointCloud& queries, const PointCloud& targets) {
  std::vector<Neighbor> out(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) out[i] = scan_nearest(queries[i], targets);
  return out;
}

std::vector<std::vector<Neighbor>> batch_knn(const KdTree& index, const PointCloud& queries,
                                             std::size_t k) {
  std::vector<std::vector<Neighbor>> out(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) out[i] = index.knn(queries[i], k);
  return out;
}

Mat pairwise_distances(const PointCloud& a, const PointCloud& b) {
  Mat out(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          std::sqrt(squared_distance(a[i], b[j]));
    }
  }
  return out;
}

void update_min_dist(const Mat& rows, std::size_t picked, std::span<double> min_d) {
  const auto p = static_cast<Eigen::Index>(picked);
  for (std::size_t i = 0; i < min_d.size(); ++i) {
    const double d = row_dist2(rows, static_cast<Eigen::Index>(i), p);
    if (d < min_d[i]) min_d[i] = d;
  }
}

}  // namespace serial

}  // namespace shapeinv::kernels
