#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "shapeinv/cloud.hpp"

namespace shapeinv {

struct EmdOptions {
  /// Clouds up to this size are solved exactly; larger ones by auction.
  std::size_t exact_limit = 512;
  double rel_gap = 1e-3;
};

/// Mean unsquared distance under the optimal bijection. Throws SizeMismatch,
/// EmptyCloud, NonFinite.
double emd(const PointCloud& a, const PointCloud& b, const EmdOptions& options = {});

enum class Normalization { None, BoundingBox, UnitSphere };

/// BoundingBox: center the box, scale its longest side to 1.
/// UnitSphere: center the centroid, scale the farthest point to radius 1.
PointCloud normalize(const PointCloud& cloud, Normalization mode);
/// "none", "bbox" or "sphere".
Normalization normalization_from_name(const std::string& name);

/// Mean over reference shapes of the smallest EMD to any generated shape.
double mmd_emd(const std::vector<PointCloud>& generated, const std::vector<PointCloud>& reference,
               Normalization mode = Normalization::None, const EmdOptions& options = {});

/// Mean squared distance from each x_p point to its nearest x_c point.
double ucd(const PointCloud& x_p, const PointCloud& x_c);
/// Max of the same per-point minima.
double uhd(const PointCloud& x_p, const PointCloud& x_c);

struct F1Report {
  double accuracy = 0.0;
  double completeness = 0.0;
  double f1 = 0.0;
  double epsilon = 0.03;
};

/// A point is matched when its nearest neighbour in the other cloud is
/// closer than epsilon (unsquared, strict). Throws NonPositiveEpsilon.
F1Report f1_score(const PointCloud& x_c, const PointCloud& x_gt, double epsilon = 0.03);

}  // namespace shapeinv
