#pragma once

#include <cstddef>
#include <vector>

#include "shapeinv/cloud.hpp"

namespace shapeinv {

struct FpsResult {
  IndexSet selected;               // sorted
  std::vector<std::size_t> order;  // selection order, order[0] == start
};

/// Greedy farthest point sampling. Each pick maximizes the squared distance to
/// the nearest already-picked point; ties go to the lower index. Deterministic.
/// Throws CountTooLarge when count is 0 or exceeds the cloud, BadStart when
/// start is out of range.
FpsResult farthest_point_sample(const PointCloud& cloud, std::size_t count,
                                std::size_t start = 0);

/// Same algorithm over the rows of an n x D matrix (used for latent codes).
FpsResult farthest_point_sample_rows(const Mat& rows, std::size_t count, std::size_t start = 0);

}  // namespace shapeinv
