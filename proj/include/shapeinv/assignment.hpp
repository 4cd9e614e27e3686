#pragma once

#include <cstddef>
#include <vector>

#include "shapeinv/cloud.hpp"

namespace shapeinv {

/// Row i is matched to column match[i]. `cost` is the primal sum; `lower_bound`
/// is a dual-feasible bound, so cost - lower_bound bounds the suboptimality.
struct Assignment {
  std::vector<std::size_t> match;
  double cost = 0.0;
  double lower_bound = 0.0;
  bool exact = false;
};

/// Minimum-cost perfect matching on a square matrix, O(n^3) shortest
/// augmenting paths with potentials. Throws SizeMismatch if not square.
Assignment hungarian(const Mat& cost);

/// Epsilon-scaling auction. Stops once cost - lower_bound <= rel_gap * cost
/// (or the gap is at rounding level). Throws SizeMismatch if not square.
Assignment auction(const Mat& cost, double rel_gap = 1e-3);

}  // namespace shapeinv
