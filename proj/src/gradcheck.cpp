#include "shapeinv/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace shapeinv {

GradCheckReport gradient_check(const ProbeFn& fn, const Vec& point, const Vec& analytic,
                               const GradCheckOptions& options) {
  if (point.size() != analytic.size()) {
    throw Error(ErrorCode::ShapeMismatch, "analytic gradient size differs from point size");
  }
  const auto n = static_cast<std::size_t>(point.size());
  std::vector<std::size_t> coords(n);
  std::iota(coords.begin(), coords.end(), 0);
  if (options.max_coords > 0 && options.max_coords < n) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(options.max_coords);
    std::sort(coords.begin(), coords.end());
  }

  const Probe base = fn(point);
  if (!std::isfinite(base.value)) throw Error(ErrorCode::NonFinite, "function not finite at point");
  const double floor =
      std::max(options.floor_ratio * analytic.cwiseAbs().maxCoeff(), 1e-300);

  GradCheckReport report;
  Vec x = point;
  for (std::size_t c : coords) {
    const auto i = static_cast<Eigen::Index>(c);
    const double orig = x[i];
    x[i] = orig + options.step;
    const Probe plus = fn(x);
    x[i] = orig - options.step;
    const Probe minus = fn(x);
    x[i] = orig;
    if (!std::isfinite(plus.value) || !std::isfinite(minus.value)) {
      throw Error(ErrorCode::NonFinite, "function not finite near coordinate " + std::to_string(c));
    }
    if (plus.signature != base.signature || minus.signature != base.signature) {
      ++report.skipped;
      continue;
    }
    const double numeric = (plus.value - minus.value) / (2.0 * options.step);
    const double a = analytic[i];
    const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
    ++report.checked;
    if (err > report.max_rel_error) {
      report.max_rel_error = err;
      report.worst_index = c;
    }
  }
  return report;
}

}  // namespace shapeinv
