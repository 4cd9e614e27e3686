#include "shapeinv/sampling.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "shapeinv/kernels.hpp"

namespace shapeinv {

FpsResult farthest_point_sample_rows(const Mat& rows, std::size_t count, std::size_t start) {
  const auto n = static_cast<std::size_t>(rows.rows());
  if (count == 0 || count > n) {
    throw Error(ErrorCode::CountTooLarge,
                "count=" + std::to_string(count) + " for " + std::to_string(n) + " points");
  }
  if (start >= n) {
    throw Error(ErrorCode::BadStart, "start=" + std::to_string(start) + " for " +
                                         std::to_string(n) + " points");
  }
  FpsResult out;
  out.order.reserve(count);
  std::vector<double> min_d(n, std::numeric_limits<double>::infinity());
  std::vector<unsigned char> taken(n, 0);

  std::size_t pick = start;
  for (std::size_t step = 0; step < count; ++step) {
    out.order.push_back(pick);
    taken[pick] = 1;
    if (step + 1 == count) break;
    kernels::update_min_dist(rows, pick, min_d);
    std::size_t best = n;
    double best_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!taken[i] && min_d[i] > best_d) {
        best_d = min_d[i];
        best = i;
      }
    }
    pick = best;
  }
  out.selected.indices = out.order;
  std::sort(out.selected.indices.begin(), out.selected.indices.end());
  return out;
}

FpsResult farthest_point_sample(const PointCloud& cloud, std::size_t count, std::size_t start) {
  require_valid(cloud, "fps cloud");
  return farthest_point_sample_rows(cloud.to_matrix(), count, start);
}

}  // namespace shapeinv
