#pragma once

// Data-parallel inner loops. Each kernel has an OpenMP version (namespace
// kernels) and a plain serial reference (namespace kernels::serial) with the
// same per-element arithmetic; tests require the two to agree bit-for-bit.

#include <cstddef>
#include <span>
#include <vector>

#include "shapeinv/cloud.hpp"
#include "shapeinv/spatial_index.hpp"

namespace shapeinv::kernels {

/// For each query point, the nearest target (lowest index on ties).
std::vector<Neighbor> nearest_neighbors(const PointCloud& queries, const PointCloud& targets);

/// k nearest neighbors of every query in the index, one list per query.
std::vector<std::vector<Neighbor>> batch_knn(const KdTree& index, const PointCloud& queries,
                                             std::size_t k);

/// |a| x |b| matrix of unsquared Euclidean distances.
Mat pairwise_distances(const PointCloud& a, const PointCloud& b);

/// min_d[i] = min(min_d[i], |rows[i] - rows[picked]|^2).
void update_min_dist(const Mat& rows, std::size_t picked, std::span<double> min_d);

namespace serial {
std::vector<Neighbor> nearest_neighbors(const PointCloud& queries, const PointCloud& targets);
std::vector<std::vector<Neighbor>> batch_knn(const KdTree& index, const PointCloud& queries,
                                             std::size_t k);
Mat pairwise_distances(const PointCloud& a, const PointCloud& b);
void update_min_dist(const Mat& rows, std::size_t picked, std::span<double> min_d);
}  // namespace serial

}  // namespace shapeinv::kernels
