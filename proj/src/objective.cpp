#include "shapeinv/objective.hpp"

#include <cmath>
#include <string>

#include "shapeinv/hash.hpp"
#include "shapeinv/kernels.hpp"
#include "shapeinv/sampling.hpp"
#include "shapeinv/spatial_index.hpp"

namespace shapeinv {

ValueGrad chamfer_cd_t(const PointCloud& a, const PointCloud& b) {
  require_valid(a, "chamfer a");
  require_valid(b, "chamfer b");
  const auto ab = kernels::nearest_neighbors(a, b);
  const auto ba = kernels::nearest_neighbors(b, a);
  const double wa = 1.0 / static_cast<double>(a.size());
  const double wb = 1.0 / static_cast<double>(b.size());

  ValueGrad out;
  out.grad = zero_grad(a.size());
  Fnv1a sig;
  double sa = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += ab[i].dist2;
    out.grad[i] += 2.0 * wa * (a[i] - b[ab[i].index]);
    sig.u64(ab[i].index);
  }
  double sb = 0.0;
  for (std::size_t j = 0; j < b.size(); ++j) {
    sb += ba[j].dist2;
    out.grad[ba[j].index] += 2.0 * wb * (a[ba[j].index] - b[j]);
    sig.u64(ba[j].index);
  }
  out.value = sa * wa + sb * wb;
  out.signature = sig.value();
  return out;
}

ValueGrad patch_variance(const PointCloud& x, const PatchSpec& spec) {
  require_valid(x, "patch_variance cloud");
  if (spec.n_patches == 0 || spec.pts_per_patch == 0) {
    throw Error(ErrorCode::BadArgument, "patch counts must be positive");
  }
  if (x.size() < spec.n_patches || x.size() < spec.pts_per_patch + 1) {
    throw Error(ErrorCode::CloudTooSmall,
                std::to_string(x.size()) + " points for " + std::to_string(spec.n_patches) +
                    " patches of " + std::to_string(spec.pts_per_patch) + " neighbours");
  }
  const std::size_t n = spec.n_patches;
  const std::size_t k = spec.pts_per_patch;
  const FpsResult seeds = farthest_point_sample(x, n, spec.fps_start);
  const KdTree index(x);
  Fnv1a sig;

  std::vector<std::vector<std::size_t>> patch(n);
  std::vector<double> rho(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t s = seeds.order[j];
    sig.u64(s);
    for (const Neighbor& nb : index.knn(x[s], k + 1)) {
      if (nb.index == s || patch[j].size() == k) continue;
      patch[j].push_back(nb.index);
      rho[j] += nb.dist2;
      sig.u64(nb.index);
    }
    rho[j] /= static_cast<double>(k);
  }
  double mean = 0.0;
  for (double r : rho) mean += r;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double r : rho) var += (r - mean) * (r - mean);
  var /= static_cast<double>(n);

  ValueGrad out;
  out.value = var;
  out.signature = sig.value();
  out.grad = zero_grad(x.size());
  for (std::size_t j = 0; j < n; ++j) {
    const double dv_drho = 2.0 * (rho[j] - mean) / static_cast<double>(n);
    const double c = dv_drho * 2.0 / static_cast<double>(k);
    const std::size_t s = seeds.order[j];
    for (std::size_t i : patch[j]) {
      const Vec3 d = x[i] - x[s];
      out.grad[i] += c * d;
      out.grad[s] -= c * d;
    }
  }
  return out;
}

ValueGrad feature_distance(const Discriminator& disc, const PointCloud& a, const Vec& b_feature) {
  require_valid(a, "feature_distance a");
  auto fa = discriminator_forward(disc, a, true);
  if (fa.feature.size() != b_feature.size()) {
    throw Error(ErrorCode::ShapeMismatch, "feature sizes differ");
  }
  const Vec diff = fa.feature - b_feature;
  Mat seed(1, diff.size());
  for (Eigen::Index c = 0; c < diff.size(); ++c) {
    seed(0, c) = diff[c] > 0.0 ? 1.0 : (diff[c] < 0.0 ? -1.0 : 0.0);
  }
  ValueGrad out;
  out.value = diff.cwiseAbs().sum();
  Fnv1a sig;
  sig.u64(fa.pass.tape.signature());
  for (Eigen::Index c = 0; c < diff.size(); ++c) sig.u64(static_cast<std::uint64_t>(seed(0, c) + 1.0));
  out.signature = sig.value();
  fa.pass.tape.backward(fa.pass.feature, seed);
  const Mat dx = fa.pass.tape.grad(fa.pass.input);
  out.grad.resize(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    out.grad[i] = dx.row(static_cast<Eigen::Index>(i)).transpose();
  }
  return out;
}

ValueGrad feature_distance(const Discriminator& disc, const PointCloud& a, const PointCloud& b) {
  require_valid(b, "feature_distance b");
  return feature_distance(disc, a, discriminator_forward(disc, b).feature);
}

ValueGrad uhd_term(const PointCloud& x_in, const PointCloud& x_c) {
  require_valid(x_in, "uhd x_in");
  require_valid(x_c, "uhd x_c");
  const auto nn = kernels::nearest_neighbors(x_in, x_c);
  std::size_t arg = 0;
  for (std::size_t i = 1; i < nn.size(); ++i) {
    if (nn[i].dist2 > nn[arg].dist2) arg = i;
  }
  ValueGrad out;
  out.value = nn[arg].dist2;
  out.grad = zero_grad(x_c.size());
  const std::size_t q = nn[arg].index;
  out.grad[q] = 2.0 * (x_c[q] - x_in[arg]);
  Fnv1a sig;
  sig.u64(arg);
  sig.u64(q);
  out.signature = sig.value();
  return out;
}

InversionTarget make_target(const PointCloud& x_in, const Discriminator* disc) {
  require_valid(x_in, "x_in");
  InversionTarget t;
  t.cloud = x_in;
  if (disc != nullptr) t.feature = discriminator_forward(*disc, x_in).feature;
  return t;
}

InversionLoss inversion_loss_with_selection(const PointCloud& x_c, const InversionTarget& target,
                                            const IndexSet& selected, const Discriminator* disc,
                                            const LossWeights& weights) {
  require_valid(x_c, "x_c");
  if (selected.empty()) throw Error(ErrorCode::EmptyMask, "degradation kept no points of x_c");
  if (!selected.valid_for(x_c.size())) {
    throw Error(ErrorCode::BadArgument, "selection does not index into x_c");
  }
  const bool use_fd = weights.fd != 0.0;
  if (use_fd && (disc == nullptr || target.feature.size() == 0)) {
    throw Error(ErrorCode::BadArgument, "feature distance needs a discriminator");
  }
  const PointCloud x_p = gather(x_c, selected);

  InversionLoss out;
  out.selected = selected;
  out.grad = zero_grad(x_c.size());
  LossBreakdown& lb = out.breakdown;
  lb.weights = weights;
  lb.selected = selected.size();

  Fnv1a sig;
  const ValueGrad cd = chamfer_cd_t(x_p, target.cloud);
  sig.u64(cd.signature);
  lb.cd = cd.value;
  for (std::size_t i = 0; i < selected.size(); ++i) {
    out.grad[selected.indices[i]] += weights.cd * cd.grad[i];
  }
  if (use_fd) {
    const ValueGrad fd = feature_distance(*disc, x_p, target.feature);
    lb.fd = fd.value;
    sig.u64(fd.signature);
    for (std::size_t i = 0; i < selected.size(); ++i) {
      out.grad[selected.indices[i]] += weights.fd * fd.grad[i];
    }
  }
  if (weights.uhd != 0.0) {
    const ValueGrad u = uhd_term(target.cloud, x_c);
    lb.uhd = u.value;
    sig.u64(u.signature);
    for (std::size_t i = 0; i < x_c.size(); ++i) out.grad[i] += weights.uhd * u.grad[i];
  }
  lb.total = weights.cd * lb.cd + weights.fd * lb.fd + weights.uhd * lb.uhd;
  out.signature = sig.value();
  return out;
}

InversionLoss inversion_loss(const PointCloud& x_c, const InversionTarget& target,
                             const DegradationKind& kind, const Discriminator* disc,
                             const LossWeights& weights) {
  const MaskResult mask = degrade(target.cloud, x_c, kind);
  return inversion_loss_with_selection(x_c, target, mask.selected, disc, weights);
}

InversionLoss inversion_loss(const PointCloud& x_c, const PointCloud& x_in,
                             const DegradationKind& kind, const Discriminator* disc,
                             const LossWeights& weights) {
  return inversion_loss(x_c, make_target(x_in, weights.fd != 0.0 ? disc : nullptr), kind, disc,
                        weights);
}

}  // namespace shapeinv
