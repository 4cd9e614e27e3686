#include "shapeinv/degradation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "shapeinv/kernels.hpp"
#include "shapeinv/spatial_index.hpp"

namespace shapeinv {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

MaskResult finish(const PointCloud& x_c, std::vector<unsigned char> flags) {
  MaskResult r;
  r.selected = index_set_from_flags(flags);
  r.partial = gather(x_c, r.selected);
  return r;
}

constexpr double kGridPad = 0.005;

}  // namespace

void validate(const DegradationKind& kind) {
  std::visit(Overloaded{
                 [](const KMask& m) {
                   if (m.k == 0) throw Error(ErrorCode::BadArgument, "k-Mask needs k >= 1");
                 },
                 [](const TauMask& m) {
                   if (!(m.tau > 0.0) || !std::isfinite(m.tau)) {
                     throw Error(ErrorCode::BadArgument, "tau-Mask needs finite tau > 0");
                   }
                 },
                 [](const VoxelMask& m) {
                   if (m.resolution == 0) {
                     throw Error(ErrorCode::BadArgument, "voxel-Mask needs resolution >= 1");
                   }
                 },
             },
             kind);
}

std::string describe(const DegradationKind& kind) {
  std::ostringstream os;
  std::visit(Overloaded{
                 [&](const KMask& m) { os << "kmask(k=" << m.k << ")"; },
                 [&](const TauMask& m) { os << "taumask(tau=" << m.tau << ")"; },
                 [&](const VoxelMask& m) { os << "voxelmask(res=" << m.resolution << ")"; },
             },
             kind);
  return os.str();
}

MaskResult k_mask(const PointCloud& x_in, const PointCloud& x_c, std::size_t k) {
  require_valid(x_in, "x_in");
  const KdTree index = build_index(x_c);
  const auto lists = kernels::batch_knn(index, x_in, k);
  std::vector<unsigned char> flags(x_c.size(), 0);
  for (const auto& list : lists) {
    for (const Neighbor& nb : list) flags[nb.index] = 1;
  }
  return finish(x_c, std::move(flags));
}

MaskResult tau_mask(const PointCloud& x_in, const PointCloud& x_c, double tau) {
  require_valid(x_in, "x_in");
  require_valid(x_c, "x_c");
  validate(TauMask{tau});
  const auto nearest = kernels::nearest_neighbors(x_c, x_in);
  std::vector<unsigned char> flags(x_c.size(), 0);
  for (std::size_t i = 0; i < nearest.size(); ++i) {
    flags[i] = std::sqrt(nearest[i].dist2) < tau ? 1 : 0;
  }
  return finish(x_c, std::move(flags));
}

VoxelGrid VoxelGrid::fit(const PointCloud& a, const PointCloud& b, std::size_t resolution) {
  Vec3 lo = a[0];
  Vec3 hi = a[0];
  for (const auto* c : {&a, &b}) {
    for (const Vec3& p : *c) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
  }
  const Vec3 extent = hi - lo;
  // A flat axis still needs a non-zero cell; use the largest extent (or 1).
  const double fallback = extent.maxCoeff() > 0.0 ? extent.maxCoeff() : 1.0;
  VoxelGrid g;
  g.resolution = resolution;
  for (int d = 0; d < 3; ++d) {
    const double e = extent[d] > 0.0 ? extent[d] : fallback;
    const double pad = kGridPad * e;
    g.lo[d] = lo[d] - pad;
    g.cell[d] = (e + 2.0 * pad) / static_cast<double>(resolution);
  }
  return g;
}

std::size_t VoxelGrid::cell_of(const Vec3& p) const {
  std::size_t id = 0;
  for (int d = 0; d < 3; ++d) {
    const double t = std::floor((p[d] - lo[d]) / cell[d]);
    std::size_t c = t <= 0.0 ? 0 : static_cast<std::size_t>(t);
    c = std::min(c, resolution - 1);
    // The division can round across a face; settle against the face
    // coordinates themselves so a point on a face lands in the upper cell.
    const auto face = [&](std::size_t j) { return lo[d] + static_cast<double>(j) * cell[d]; };
    if (c + 1 < resolution && p[d] >= face(c + 1)) {
      ++c;
    } else if (c > 0 && p[d] < face(c)) {
      --c;
    }
    id = id * resolution + c;
  }
  return id;
}

MaskResult voxel_mask(const PointCloud& x_in, const PointCloud& x_c, std::size_t resolution) {
  require_valid(x_in, "x_in");
  require_valid(x_c, "x_c");
  validate(VoxelMask{resolution});
  const VoxelGrid grid = VoxelGrid::fit(x_in, x_c, resolution);
  std::unordered_set<std::size_t> occupied;
  occupied.reserve(x_in.size());
  for (const Vec3& p : x_in) occupied.insert(grid.cell_of(p));
  std::vector<unsigned char> flags(x_c.size(), 0);
  for (std::size_t i = 0; i < x_c.size(); ++i) {
    flags[i] = occupied.count(grid.cell_of(x_c[i])) ? 1 : 0;
  }
  return finish(x_c, std::move(flags));
}

MaskResult degrade(const PointCloud& x_in, const PointCloud& x_c, const DegradationKind& kind) {
  validate(kind);
  return std::visit(
      Overloaded{
          [&](const KMask& m) { return k_mask(x_in, x_c, m.k); },
          [&](const TauMask& m) { return tau_mask(x_in, x_c, m.tau); },
          [&](const VoxelMask& m) { return voxel_mask(x_in, x_c, m.resolution); },
      },
      kind);
}

}  // namespace shapeinv
