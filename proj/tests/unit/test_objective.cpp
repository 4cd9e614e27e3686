#include <doctest.h>

#include <Eigen/Geometry>

#include <cmath>

#include "../oracles.hpp"
#include "shapeinv/checkpoint.hpp"
#include "shapeinv/gradcheck.hpp"
#include "shapeinv/objective.hpp"

using namespace shapeinv;

namespace {

Discriminator small_disc(std::uint64_t seed) {
  Rng rng(seed);
  DiscriminatorArch arch;
  arch.point_widths = {16, 24};
  arch.head_widths = {8};
  return Discriminator(arch, Discriminator::init_params(arch, rng));
}

Vec flat(const PointCloud& c) {
  Vec v(3 * c.size());
  for (std::size_t i = 0; i < c.size(); ++i) v.segment<3>(3 * i) = c[i];
  return v;
}

PointCloud unflat(const Vec& v) {
  PointCloud c;
  for (Eigen::Index i = 0; i < v.size() / 3; ++i) c.push_back(v.segment<3>(3 * i));
  return c;
}

Vec flat(const CloudGrad& g) {
  Vec v(3 * g.size());
  for (std::size_t i = 0; i < g.size(); ++i) v.segment<3>(3 * i) = g[i];
  return v;
}

}  // namespace

TEST_CASE("chamfer examples") {
  const PointCloud a = {Vec3(0, 0, 0)};
  const PointCloud b = {Vec3(1, 0, 0)};
  CHECK(chamfer_cd_t(a, b).value == 2.0);
  Rng rng(3);
  const PointCloud c = oracle::random_cloud(20, rng);
  const ValueGrad same = chamfer_cd_t(c, c);
  CHECK(same.value == 0.0);
  for (const Vec3& g : same.grad) CHECK(g.norm() == 0.0);
}

TEST_CASE("chamfer equals a double-loop recomputation and its gradient checks out") {
  Rng rng(9);
  for (int t = 0; t < 10; ++t) {
    const PointCloud a = oracle::random_cloud(32, rng);
    const PointCloud b = oracle::random_cloud(48, rng);
    const ValueGrad vg = chamfer_cd_t(a, b);
    CHECK(vg.value == doctest::Approx(oracle::chamfer(a, b)).epsilon(1e-12));
    const auto fn = [&](const Vec& x) {
      const ValueGrad r = chamfer_cd_t(unflat(x), b);
      return Probe{r.value, r.signature};
    };
    const GradCheckReport rep = gradient_check(fn, flat(a), flat(vg.grad));
    CHECK(rep.max_rel_error <= 1e-6);
    CHECK(rep.checked > 0);
  }
}

TEST_CASE("patch variance: one patch has zero variance") {
  Rng rng(1);
  const PointCloud x = oracle::random_cloud(64, rng);
  CHECK(patch_variance(x, {1, 10, 0}).value == 0.0);
}

TEST_CASE("patch variance is invariant to rigid motion") {
  Rng rng(2);
  const PointCloud x = oracle::random_cloud(200, rng);
  const Eigen::Matrix3d rot = Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()).toRotationMatrix();
  const PointCloud y = transformed(x, rot, Vec3(0.3, -1.0, 2.0));
  CHECK(patch_variance(y, {20, 8, 0}).value ==
        doctest::Approx(patch_variance(x, {20, 8, 0}).value).epsilon(1e-9));
}

TEST_CASE("patch variance equals a two-pass recomputation") {
  Rng rng(5);
  const PointCloud x = oracle::random_cloud(512, rng);
  const std::size_t n = 100, k = 30;
  const auto seeds = oracle::fps(x, n, 0);
  std::vector<double> rho;
  for (std::size_t s : seeds) {
    const auto order = oracle::ranked(x, x[s]);
    double sum = 0.0;
    std::size_t taken = 0;
    for (std::size_t j : order) {
      if (j == s) continue;
      sum += oracle::d2(x[j], x[s]);
      if (++taken == k) break;
    }
    rho.push_back(sum / k);
  }
  double mean = 0.0;
  for (double r : rho) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : rho) var += (r - mean) * (r - mean);
  var /= n;
  CHECK(patch_variance(x, {n, k, 0}).value == doctest::Approx(var).epsilon(1e-10));
}

TEST_CASE("patch variance rejects clouds too small for its patches") {
  Rng rng(5);
  const PointCloud x = oracle::random_cloud(30, rng);
  try {
    patch_variance(x, {10, 30, 0});
    FAIL("expected CloudTooSmall");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CloudTooSmall);
  }
}

TEST_CASE("feature distance: zero on equal clouds, blind to point order") {
  const Discriminator d = small_disc(4);
  Rng rng(6);
  const PointCloud a = oracle::random_cloud(25, rng);
  const PointCloud b = oracle::random_cloud(25, rng);
  CHECK(feature_distance(d, a, a).value == 0.0);
  std::vector<Vec3> rev(a.points().rbegin(), a.points().rend());
  CHECK(feature_distance(d, PointCloud(rev), b).value == feature_distance(d, a, b).value);
}

TEST_CASE("uhd term examples and full-scan equality") {
  const PointCloud x_in = {Vec3(0, 0, 0), Vec3(2, 0, 0)};
  const PointCloud x_c = {Vec3(0, 0, 0)};
  CHECK(uhd_term(x_in, x_c).value == 4.0);
  CHECK(uhd_term(x_c, PointCloud{Vec3(0, 0, 0), Vec3(5, 5, 5)}).value == 0.0);

  Rng rng(7);
  for (int t = 0; t < 20; ++t) {
    const PointCloud a = oracle::random_cloud(30, rng);
    const PointCloud b = oracle::random_cloud(50, rng);
    double worst = 0.0;
    for (const Vec3& p : a) {
      double m = 1e300;
      for (const Vec3& q : b) m = std::min(m, oracle::d2(p, q));
      worst = std::max(worst, m);
    }
    CHECK(uhd_term(a, b).value == worst);
  }
}

TEST_CASE("inversion loss: perfect reconstruction and single-term weights") {
  const Discriminator d = small_disc(8);
  Rng rng(8);
  const PointCloud x_in = oracle::random_cloud(40, rng);
  const InversionLoss same = inversion_loss(x_in, x_in, KMask{1}, &d, LossWeights{});
  CHECK(same.breakdown.cd == 0.0);
  CHECK(same.breakdown.fd == 0.0);
  CHECK(same.selected.size() == x_in.size());

  const PointCloud x_c = oracle::random_cloud(120, rng);
  const InversionLoss only_cd = inversion_loss(x_c, x_in, KMask{3}, nullptr, {1.0, 0.0, 0.0});
  const MaskResult m = k_mask(x_in, x_c, 3);
  CHECK(only_cd.breakdown.total == chamfer_cd_t(m.partial, x_in).value);
  for (std::size_t i = 0; i < x_c.size(); ++i) {
    if (!m.selected.contains(i)) CHECK(only_cd.grad[i].norm() == 0.0);
  }
}

TEST_CASE("inversion loss: frozen-mask gradient matches finite differences") {
  const Discriminator d = small_disc(10);
  Rng rng(10);
  for (int t = 0; t < 5; ++t) {
    const PointCloud x_in = oracle::random_cloud(30, rng);
    const PointCloud x_c = oracle::random_cloud(90, rng);
    const InversionTarget target = make_target(x_in, &d);
    const IndexSet sel = k_mask(x_in, x_c, 5).selected;
    const LossWeights w{1.0, 1.0, 0.5};
    const InversionLoss l = inversion_loss_with_selection(x_c, target, sel, &d, w);
    const auto fn = [&](const Vec& v) {
      const InversionLoss r = inversion_loss_with_selection(unflat(v), target, sel, &d, w);
      return Probe{r.breakdown.total, r.signature};
    };
    const GradCheckReport rep = gradient_check(fn, flat(x_c), flat(l.grad));
    CHECK(rep.max_rel_error <= 1e-5);
  }
}

TEST_CASE("inversion loss errors") {
  const PointCloud x_in = {Vec3(10, 10, 10)};
  const PointCloud x_c = {Vec3(0, 0, 0), Vec3(1, 0, 0)};
  try {
    inversion_loss(x_c, x_in, TauMask{0.5}, nullptr, {1.0, 0.0, 0.0});
    FAIL("expected EmptyMask");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyMask);
  }
  try {
    inversion_loss(x_c, x_in, KMask{1}, nullptr, LossWeights{});
    FAIL("expected BadArgument");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BadArgument);
  }
}

TEST_CASE("gradient check on a quadratic is accurate") {
  const auto fn = [](const Vec& x) { return Probe{x.squaredNorm(), 0}; };
  Vec p(5);
  p << 1.0, -2.0, 0.5, 3.0, -0.25;
  CHECK(gradient_check(fn, p, 2.0 * p).max_rel_error <= 1e-8);
}
