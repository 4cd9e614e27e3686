#include "shapeinv/assignment.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace shapeinv {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_square(const Mat& cost) {
  if (cost.rows() != cost.cols()) throw Error(ErrorCode::SizeMismatch, "cost matrix is not square");
}

double matched_cost(const Mat& cost, const std::vector<std::size_t>& match) {
  double s = 0.0;
  for (std::size_t i = 0; i < match.size(); ++i) {
    s += cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(match[i]));
  }
  return s;
}

}  // namespace

Assignment hungarian(const Mat& cost) {
  require_square(cost);
  const auto n = static_cast<std::size_t>(cost.rows());
  Assignment out;
  out.exact = true;
  if (n == 0) return out;

  // 1-based arrays; column 0 is the virtual source of each augmenting path.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> owner(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  auto c = [&](std::size_t i, std::size_t j) {
    return cost(static_cast<Eigen::Index>(i - 1), static_cast<Eigen::Index>(j - 1));
  };
  for (std::size_t i = 1; i <= n; ++i) {
    owner[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = owner[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = c(i0, j) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[owner[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (owner[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      owner[j0] = owner[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  out.match.assign(n, 0);
  for (std::size_t j = 1; j <= n; ++j) out.match[owner[j] - 1] = j - 1;
  out.cost = matched_cost(cost, out.match);
  out.lower_bound = std::accumulate(u.begin() + 1, u.end(), 0.0) +
                    std::accumulate(v.begin() + 1, v.end(), 0.0);
  return out;
}

Assignment auction(const Mat& cost, double rel_gap) {
  require_square(cost);
  if (!(rel_gap > 0.0)) throw Error(ErrorCode::BadArgument, "auction gap must be positive");
  const auto n = static_cast<std::size_t>(cost.rows());
  Assignment out;
  if (n <= 1) {
    out.match.assign(n, 0);
    out.cost = n == 1 ? cost(0, 0) : 0.0;
    out.lower_bound = out.cost;
    out.exact = true;
    return out;
  }
  const double max_cost = cost.cwiseAbs().maxCoeff();
  if (max_cost == 0.0) {
    out.match.resize(n);
    std::iota(out.match.begin(), out.match.end(), std::size_t{0});
    out.exact = true;
    return out;
  }

  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::vector<double> price(n, 0.0);
  std::vector<std::size_t> row_of(n), col_of(n);
  std::vector<std::size_t> queue;
  const double floor_gap = 1e-12 * max_cost * static_cast<double>(n);
  double eps = max_cost / 4.0;

  for (;;) {
    std::fill(row_of.begin(), row_of.end(), kNone);
    std::fill(col_of.begin(), col_of.end(), kNone);
    queue.resize(n);
    std::iota(queue.rbegin(), queue.rend(), std::size_t{0});
    while (!queue.empty()) {
      const std::size_t i = queue.back();
      queue.pop_back();
      const auto* row = cost.row(static_cast<Eigen::Index>(i)).data();
      double best = kInf, second = kInf;
      std::size_t best_j = 0;
      for (std::size_t j = 0; j < n; ++j) {
        const double w = row[j] + price[j];
        if (w < best) {
          second = best;
          best = w;
          best_j = j;
        } else if (w < second) {
          second = w;
        }
      }
      price[best_j] += (second - best) + eps;
      if (row_of[best_j] != kNone) {
        col_of[row_of[best_j]] = kNone;
        queue.push_back(row_of[best_j]);
      }
      row_of[best_j] = i;
      col_of[i] = best_j;
    }

    out.match = col_of;
    out.cost = matched_cost(cost, out.match);
    double lb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto* row = cost.row(static_cast<Eigen::Index>(i)).data();
      double best = kInf;
      for (std::size_t j = 0; j < n; ++j) best = std::min(best, row[j] + price[j]);
      lb += best;
    }
    for (double p : price) lb -= p;
    out.lower_bound = lb;
    const double gap = out.cost - lb;
    if (gap <= rel_gap * out.cost || gap <= floor_gap || eps < 1e-15 * max_cost) break;
    eps /= 5.0;
  }
  return out;
}

}  // namespace shapeinv
