#include <doctest.h>

#include "../oracles.hpp"
#include "shapeinv/adam.hpp"
#include "shapeinv/gradsuite.hpp"
#include "shapeinv/nets.hpp"

using namespace shapeinv;

namespace {

Mat leaky(const Mat& x, double s) { return x.unaryExpr([s](double v) { return v > 0 ? v : s * v; }); }

}  // namespace

TEST_CASE("adam follows the published recurrence over grads 1, 1, -1") {
  Vec x(1), g(1);
  x << 1.0;
  AdamState st = AdamState::like(1);
  const double want_x[] = {0.900000001, 0.8000000020000007, 0.7738007402693734};
  const double want_m[] = {0.09999999999999998, 0.18999999999999995, 0.07099999999999998};
  const double want_v[] = {0.0010000000000000009, 0.0019990000000000016, 0.0029970010000000026};
  const double grads[] = {1.0, 1.0, -1.0};
  for (int t = 0; t < 3; ++t) {
    g << grads[t];
    adam_step(x, g, st, 0.1);
    CHECK(st.step == static_cast<std::uint64_t>(t + 1));
    CHECK(x[0] == doctest::Approx(want_x[t]).epsilon(1e-14));
    CHECK(st.m[0] == doctest::Approx(want_m[t]).epsilon(1e-14));
    CHECK(st.v[0] == doctest::Approx(want_v[t]).epsilon(1e-14));
  }
}

TEST_CASE("adam: zero gradient leaves parameters and counts the step") {
  Vec x = Vec::LinSpaced(4, -1.0, 1.0);
  const Vec before = x;
  AdamState st = AdamState::like(4);
  adam_step(x, Vec::Zero(4), st, 0.5);
  CHECK(x == before);
  CHECK(st.step == 1);
  Vec wrong(3);
  CHECK_THROWS_AS(adam_step(x, wrong, st, 0.5), Error);
}

TEST_CASE("adam: first step moves each coordinate by about lr against the gradient sign") {
  Vec x = Vec::Zero(3), g(3);
  g << 2.0, -0.5, 1e-3;
  AdamState st = AdamState::like(3);
  adam_step(x, g, st, 0.01);
  CHECK(x[0] == doctest::Approx(-0.01).epsilon(1e-6));
  CHECK(x[1] == doctest::Approx(0.01).epsilon(1e-6));
  CHECK(x[2] == doctest::Approx(-0.01).epsilon(1e-4));
}

TEST_CASE("generator with all-zero parameters puts every point at the origin") {
  GeneratorArch arch;
  arch.points = 16;
  Rng rng(1);
  NetParams p = Generator::init_params(arch, rng).zeros_like();
  const Generator g(arch, p);
  const PointCloud c = g.generate(sample_latent(arch.latent_dim, rng));
  REQUIRE(c.size() == 16);
  for (const Vec3& q : c) CHECK(q.norm() == 0.0);
}

TEST_CASE("generator is deterministic and sized 3m") {
  GeneratorArch arch;
  arch.points = 32;
  Rng rng(2);
  const Generator g(arch, Generator::init_params(arch, rng));
  const Vec z = sample_latent(arch.latent_dim, rng);
  CHECK(g.generate(z) == g.generate(z));
  CHECK(g.params()[g.params().count() - 1].value.cols() == 96);
}

TEST_CASE("discriminator: point order does not matter, one point gives its own embedding") {
  DiscriminatorArch arch;
  Rng rng(3);
  const Discriminator d(arch, Discriminator::init_params(arch, rng));
  const PointCloud x = oracle::random_cloud(20, rng);
  std::vector<Vec3> rev(x.points().rbegin(), x.points().rend());
  const auto a = discriminator_forward(d, x);
  const auto b = discriminator_forward(d, PointCloud(rev));
  CHECK(a.score == b.score);
  CHECK(a.feature == b.feature);

  const PointCloud one = {Vec3(0.1, -0.2, 0.3)};
  Mat h = one.to_matrix();
  const auto& prm = d.params();
  for (std::size_t l = 0; l < arch.point_widths.size(); ++l) {
    Mat z = h * prm[2 * l].value;
    z.rowwise() += prm[2 * l + 1].value.row(0);
    h = leaky(z, arch.slope);
  }
  CHECK((discriminator_forward(d, one).feature.transpose() - h.row(0)).norm() <= 1e-14);
}

TEST_CASE("net params flatten round trip and lerp endpoints") {
  GeneratorArch arch;
  arch.points = 8;
  arch.hidden = {5, 7};
  arch.latent_dim = 4;
  Rng rng(4);
  const NetParams a = Generator::init_params(arch, rng);
  const NetParams b = Generator::init_params(arch, rng);
  NetParams c = a.zeros_like();
  c.unflatten(a.flatten());
  CHECK(c == a);
  CHECK(lerp(a, b, 0.0) == a);
  CHECK(lerp(a, b, 1.0) == b);
  CHECK(a.flat_size() == static_cast<std::size_t>(4 * 5 + 5 + 5 * 7 + 7 + 7 * 24 + 24));
  Vec short_vec(3);
  CHECK_THROWS_AS(c.unflatten(short_vec), Error);
}

TEST_CASE("gradient suite passes on a few configurations") {
  SuiteOptions o;
  o.configs = 3;
  o.seed = 77;
  const auto entries = run_gradient_suite(o);
  CHECK(entries.size() >= 8);
  for (const auto& e : entries) {
    INFO(e.name << " worst " << e.worst);
    CHECK(e.pass);
    CHECK(e.checked > 0);
  }
}
