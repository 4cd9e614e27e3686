#include "shapeinv/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "shapeinv/assignment.hpp"
#include "shapeinv/kernels.hpp"
#include "shapeinv/objective.hpp"

namespace shapeinv {

double emd(const PointCloud& a, const PointCloud& b, const EmdOptions& options) {
  require_valid(a, "emd a");
  require_valid(b, "emd b");
  if (a.size() != b.size()) {
    throw Error(ErrorCode::SizeMismatch,
                "emd needs equal sizes, got " + std::to_string(a.size()) + " and " +
                    std::to_string(b.size()));
  }
  const Mat cost = kernels::pairwise_distances(a, b);
  const Assignment sol =
      a.size() <= options.exact_limit ? hungarian(cost) : auction(cost, options.rel_gap);
  return sol.cost / static_cast<double>(a.size());
}

PointCloud normalize(const PointCloud& cloud, Normalization mode) {
  require_valid(cloud, "normalize");
  if (mode == Normalization::None) return cloud;
  Vec3 center;
  double scale = 1.0;
  if (mode == Normalization::BoundingBox) {
    Vec3 lo = cloud[0], hi = cloud[0];
    for (const Vec3& p : cloud) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    center = 0.5 * (lo + hi);
    scale = (hi - lo).maxCoeff();
  } else {
    center = Vec3::Zero();
    for (const Vec3& p : cloud) center += p;
    center /= static_cast<double>(cloud.size());
    scale = 0.0;
    for (const Vec3& p : cloud) scale = std::max(scale, (p - center).norm());
  }
  if (scale == 0.0) scale = 1.0;
  PointCloud out = translated(cloud, -center);
  return scaled(out, 1.0 / scale);
}

Normalization normalization_from_name(const std::string& name) {
  if (name == "none") return Normalization::None;
  if (name == "bbox") return Normalization::BoundingBox;
  if (name == "sphere") return Normalization::UnitSphere;
  throw Error(ErrorCode::BadArgument, "normalization must be none, bbox or sphere, not '" + name + "'");
}

double mmd_emd(const std::vector<PointCloud>& generated, const std::vector<PointCloud>& reference,
               Normalization mode, const EmdOptions& options) {
  if (generated.empty() || reference.empty()) {
    throw Error(ErrorCode::EmptyCloud, "mmd_emd needs non-empty shape sets");
  }
  std::vector<PointCloud> gen, ref;
  for (const auto& c : generated) gen.push_back(normalize(c, mode));
  for (const auto& c : reference) ref.push_back(normalize(c, mode));
  std::vector<double> best(ref.size(), std::numeric_limits<double>::infinity());
  // Per-reference minima are independent; the final sum runs in fixed order.
#pragma omp parallel for schedule(dynamic) if (ref.size() > 1)
  for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(ref.size()); ++r) {
    for (const auto& g : gen) {
      best[static_cast<std::size_t>(r)] =
          std::min(best[static_cast<std::size_t>(r)], emd(g, ref[static_cast<std::size_t>(r)], options));
    }
  }
  double sum = 0.0;
  for (double b : best) sum += b;
  return sum / static_cast<double>(ref.size());
}

double ucd(const PointCloud& x_p, const PointCloud& x_c) {
  require_valid(x_p, "ucd x_p");
  require_valid(x_c, "ucd x_c");
  double sum = 0.0;
  for (const Neighbor& nb : kernels::nearest_neighbors(x_p, x_c)) sum += nb.dist2;
  return sum / static_cast<double>(x_p.size());
}

double uhd(const PointCloud& x_p, const PointCloud& x_c) { return uhd_term(x_p, x_c).value; }

F1Report f1_score(const PointCloud& x_c, const PointCloud& x_gt, double epsilon) {
  require_valid(x_c, "f1 x_c");
  require_valid(x_gt, "f1 x_gt");
  if (!(epsilon > 0.0)) throw Error(ErrorCode::NonPositiveEpsilon, "epsilon must be > 0");
  auto fraction = [epsilon](const PointCloud& from, const PointCloud& to) {
    std::size_t hit = 0;
    for (const Neighbor& nb : kernels::nearest_neighbors(from, to)) {
      if (std::sqrt(nb.dist2) < epsilon) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(from.size());
  };
  F1Report r;
  r.epsilon = epsilon;
  r.accuracy = fraction(x_c, x_gt);
  r.completeness = fraction(x_gt, x_c);
  const double s = r.accuracy + r.completeness;
  r.f1 = s > 0.0 ? 2.0 * r.accuracy * r.completeness / s : 0.0;
  return r;
}

}  // namespace shapeinv
