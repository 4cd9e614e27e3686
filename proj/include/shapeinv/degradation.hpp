#pragma once

#include <cstddef>
#include <string>
#include <variant>

#include "shapeinv/cloud.hpp"

namespace shapeinv {

/// Keep the union of each input point's k nearest generated points.
struct KMask {
  std::size_t k = 5;
};
/// Keep generated points whose nearest input point is closer than tau.
struct TauMask {
  double tau = 0.03;
};
/// Keep generated points that fall in voxels occupied by the input.
struct VoxelMask {
  std::size_t resolution = 10;
};

using DegradationKind = std::variant<KMask, TauMask, VoxelMask>;

/// Throws BadArgument on a non-positive parameter.
void validate(const DegradationKind& kind);
std::string describe(const DegradationKind& kind);

struct MaskResult {
  PointCloud partial;  // x_c restricted to `selected`, x_c order preserved
  IndexSet selected;   // indices into x_c
  bool empty() const noexcept { return selected.empty(); }
};

/// Throws EmptyCloud, NonFinite, KTooLarge.
MaskResult k_mask(const PointCloud& x_in, const PointCloud& x_c, std::size_t k);

/// Strict comparison: kept iff min_p |p - q| < tau. The result may be empty.
MaskResult tau_mask(const PointCloud& x_in, const PointCloud& x_c, double tau);

/// resolution^3 grid over the joint bounding box, padded by 0.5% of the
/// extent on each side. A point on an interior cell face belongs to the
/// upper cell. The result may be empty.
MaskResult voxel_mask(const PointCloud& x_in, const PointCloud& x_c, std::size_t resolution);

MaskResult degrade(const PointCloud& x_in, const PointCloud& x_c, const DegradationKind& kind);

/// Grid used by voxel_mask; exposed for diagnostics and tests.
struct VoxelGrid {
  Vec3 lo;
  Vec3 cell;  // edge length per axis
  std::size_t resolution;

  static VoxelGrid fit(const PointCloud& a, const PointCloud& b, std::size_t resolution);
  std::size_t cell_of(const Vec3& p) const;
};

}  // namespace shapeinv
