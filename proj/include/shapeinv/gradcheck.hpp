#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

#include "shapeinv/cloud.hpp"

namespace shapeinv {

/// Scalar function value plus a hash of the discrete choices made while
/// computing it (nearest neighbours, activation signs, pooling winners).
struct Probe {
  double value = 0.0;
  std::uint64_t signature = 0;
};

using ProbeFn = std::function<Probe(const Vec&)>;

struct GradCheckOptions {
  double step = 1e-6;
  /// 0 checks every coordinate; otherwise a seeded random subset of this size.
  std::size_t max_coords = 0;
  std::uint64_t seed = 0;
  /// Per-coordinate errors are divided by max(|a|, |n|, floor_ratio * max|a|).
  double floor_ratio = 1e-3;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
  /// Coordinates whose +/- step changed the signature (a kink was crossed).
  std::size_t skipped = 0;
};

/// Central differences against `analytic`. Throws NonFinite if fn is not
/// finite at a probe point, ShapeMismatch on size mismatch.
GradCheckReport gradient_check(const ProbeFn& fn, const Vec& point, const Vec& analytic,
                               const GradCheckOptions& options = {});

}  // namespace shapeinv
