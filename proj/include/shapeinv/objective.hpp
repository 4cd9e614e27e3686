#pragma once

#include <cstddef>
#include <cstdint>

#include "shapeinv/cloud.hpp"
#include "shapeinv/degradation.hpp"
#include "shapeinv/nets.hpp"

namespace shapeinv {

/// Scalar loss, its gradient w.r.t. the differentiable cloud, and a hash of
/// the discrete assignments the value depended on.
struct ValueGrad {
  double value = 0.0;
  CloudGrad grad;
  std::uint64_t signature = 0;
};

struct LossWeights {
  double cd = 1.0;
  double fd = 1.0;
  double uhd = 0.0;
};

struct LossBreakdown {
  double cd = 0.0;
  double fd = 0.0;
  double uhd = 0.0;
  double patch_var = 0.0;
  double total = 0.0;
  LossWeights weights;
  std::size_t selected = 0;  // |x_p|
};

/// Mean squared nearest-neighbour distance a->b plus b->a; gradient w.r.t. a
/// with neighbour assignments held fixed. Throws EmptyCloud / NonFinite.
ValueGrad chamfer_cd_t(const PointCloud& a, const PointCloud& b);

struct PatchSpec {
  std::size_t n_patches = 100;
  std::size_t pts_per_patch = 30;
  std::size_t fps_start = 0;
};

/// Population variance over FPS-seeded patches of the mean squared
/// seed-to-neighbour distance. The seed is not its own neighbour, so the
/// cloud needs at least max(n_patches, pts_per_patch + 1) points
/// (CloudTooSmall otherwise).
ValueGrad patch_variance(const PointCloud& x, const PatchSpec& spec = {});

/// L1 distance between the discriminator's pooled features of a and b,
/// gradient w.r.t. a through the discriminator.
ValueGrad feature_distance(const Discriminator& disc, const PointCloud& a, const PointCloud& b);
ValueGrad feature_distance(const Discriminator& disc, const PointCloud& a, const Vec& b_feature);

/// max over x_in of the squared distance to the nearest x_c point; the
/// subgradient sits on the arg-max pair (lowest x_in index on ties).
ValueGrad uhd_term(const PointCloud& x_in, const PointCloud& x_c);

/// Partial input with its discriminator feature computed once.
struct InversionTarget {
  PointCloud cloud;
  Vec feature;  // empty when no discriminator is involved
};
InversionTarget make_target(const PointCloud& x_in, const Discriminator* disc);

struct InversionLoss {
  LossBreakdown breakdown;
  CloudGrad grad;    // w.r.t. x_c; zero on unselected points except for UHD
  IndexSet selected;
  std::uint64_t signature = 0;  // combined discrete choices of the terms
};

/// x_p = M(x_c); total = w_cd CD(x_p, x_in) + w_fd FD(x_p, x_in) + w_uhd UHD(x_in, x_c).
/// `disc` may be null only when weights.fd == 0. Throws EmptyMask when the
/// degradation keeps no points.
InversionLoss inversion_loss(const PointCloud& x_c, const InversionTarget& target,
                             const DegradationKind& kind, const Discriminator* disc,
                             const LossWeights& weights);
InversionLoss inversion_loss(const PointCloud& x_c, const PointCloud& x_in,
                             const DegradationKind& kind, const Discriminator* disc,
                             const LossWeights& weights);

/// Same composition with the mask selection supplied (frozen).
InversionLoss inversion_loss_with_selection(const PointCloud& x_c, const InversionTarget& target,
                                            const IndexSet& selected, const Discriminator* disc,
                                            const LossWeights& weights);

}  // namespace shapeinv
