#include <doctest.h>

#include <cmath>

#include "../oracles.hpp"
#include "shapeinv/gradcheck.hpp"
#include "shapeinv/shapes.hpp"
#include "shapeinv/trainer.hpp"

using namespace shapeinv;

namespace {

TrainConfig tiny_config() {
  TrainConfig c;
  c.epochs = 2;
  c.batch_size = 4;
  c.steps_per_epoch = 2;
  c.critic_steps = 2;
  c.lr_g = c.lr_d = 1e-3;
  c.generator.latent_dim = 8;
  c.generator.hidden = {16, 32};
  c.generator.points = 32;
  c.discriminator.point_widths = {8, 16};
  c.discriminator.head_widths = {8};
  c.uniformity = Uniformity::PatchVariance;
  c.patch = {8, 4, 0};
  c.seed = 5;
  return c;
}

}  // namespace

TEST_CASE("sphere family samples sit on their sphere") {
  Rng rng(1);
  const PointCloud c = sample_shape(SphereFamily{0.4, 0.4}, 500, rng);
  REQUIRE(c.size() == 500);
  for (const Vec3& p : c) CHECK(std::abs(p.norm() - 0.4) <= 1e-9);
}

TEST_CASE("every family fits the unit cube with exactly m points and is reproducible") {
  for (const char* name : {"sphere", "box", "cylinder", "lamp"}) {
    ShapeFamily f;
    f.kind = family_from_name(name);
    f.points = 200;
    f.seed = 9;
    const auto a = synth_dataset(f, 12);
    const auto b = synth_dataset(f, 12);
    CHECK(a == b);
    for (const auto& c : a) {
      CHECK(c.size() == 200);
      for (const Vec3& p : c) CHECK(p.cwiseAbs().maxCoeff() <= 0.5);
    }
    CHECK(family_name(f.kind) == name);
  }
  CHECK_THROWS_AS(family_from_name("teapot"), Error);
}

TEST_CASE("box faces receive points in proportion to area within 3 sigma") {
  Rng rng(2);
  const Vec3 sides(0.3, 0.6, 0.9);
  std::vector<int> face;
  const std::size_t n = 1000;
  sample_box_surface(sides, n, rng, &face);
  const double areas[3] = {sides.y() * sides.z(), sides.z() * sides.x(), sides.x() * sides.y()};
  const double total = 2.0 * (areas[0] + areas[1] + areas[2]);
  std::vector<int> count(6, 0);
  for (int f : face) ++count[f];
  for (int f = 0; f < 6; ++f) {
    const double p = areas[f / 2] / total;
    const double mean = n * p;
    const double sigma = std::sqrt(n * p * (1.0 - p));
    CHECK(std::abs(count[f] - mean) <= 3.0 * sigma);
  }
}

TEST_CASE("half-space cut keeps the lowest projections") {
  Rng rng(3);
  const PointCloud c = oracle::random_cloud(100, rng);
  const Vec3 dir = Vec3(1, 1, 0).normalized();
  const PointCloud kept = half_space_cut(c, dir, 0.6);
  CHECK(kept.size() == 40);
  double max_kept = -1e9;
  for (const Vec3& p : kept) max_kept = std::max(max_kept, p.dot(dir));
  std::size_t below = 0;
  for (const Vec3& p : c) below += p.dot(dir) <= max_kept;
  CHECK(below == 40);
  CHECK(half_space_cut(c, dir, 0.9999).size() == 1);
}

TEST_CASE("chair fixture flags its legs") {
  Rng rng(4);
  std::vector<unsigned char> leg;
  const PointCloud c = chair(1000, 0.05, rng, &leg, 0.01);
  REQUIRE(leg.size() == 1000);
  std::size_t n = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (!leg[i]) continue;
    ++n;
    CHECK(c[i].y() <= -0.025 + 1e-12);
    const double r = std::hypot(std::abs(c[i].x()) - 0.25, std::abs(c[i].z()) - 0.25);
    CHECK(r == doctest::Approx(0.01).epsilon(1e-9));
  }
  CHECK(n > 0);
}

TEST_CASE("zero epochs return the initial parameters") {
  Rng rng(5);
  ShapeFamily f;
  f.points = 32;
  const auto data = synth_dataset(f, 8);
  TrainConfig c = tiny_config();
  c.epochs = 0;
  const TrainResult r = train_gan(data, c);
  const Checkpoint init = init_checkpoint(c.generator, c.discriminator, c.seed);
  CHECK(r.checkpoint.generator == init.generator);
  CHECK(r.checkpoint.discriminator == init.discriminator);
  CHECK(r.history.empty());
}

TEST_CASE("resumed training continues exactly like an unbroken run") {
  ShapeFamily f;
  f.points = 32;
  const auto data = synth_dataset(f, 8);
  TrainConfig full = tiny_config();
  full.epochs = 3;
  const TrainResult straight = train_gan(data, full);
  REQUIRE(straight.history.size() == 3);
  for (const auto& e : straight.history) {
    CHECK(std::isfinite(e.patch_var));
    CHECK(e.patch_var >= 0.0);
  }

  TrainConfig first = full;
  first.epochs = 1;
  const TrainResult part = train_gan(data, first);
  const TrainResult rest = train_gan(data, full, &part.checkpoint);
  CHECK(rest.checkpoint == straight.checkpoint);
  REQUIRE(rest.history.size() == 2);
  CHECK(rest.history[1].critic_loss == straight.history[2].critic_loss);
  CHECK(rest.history[1].generator_adv == straight.history[2].generator_adv);

  TrainConfig other = full;
  other.lr_g = 2e-3;
  CHECK_THROWS_AS(train_gan(data, other, &part.checkpoint), Error);
}

TEST_CASE("training rejects clouds of the wrong size") {
  ShapeFamily f;
  f.points = 20;
  CHECK_THROWS_AS(train_gan(synth_dataset(f, 4), tiny_config()), Error);
}

TEST_CASE("repulsion loss examples and gradient") {
  const PointCloud far = {Vec3(0, 0, 0), Vec3(1, 0, 0)};
  CHECK(repulsion_loss(far, 0.07).value == 0.0);

  const PointCloud twin = {Vec3(0.2, 0.2, 0.2), Vec3(0.2, 0.2, 0.2)};
  const ValueGrad t = repulsion_loss(twin, 0.07);
  CHECK(t.value > 0.0);
  CHECK((t.grad[0] + t.grad[1]).norm() <= 1e-15);
  CHECK(t.grad[0].norm() > 0.0);

  Rng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const PointCloud x = oracle::random_cloud(40, rng, 0.15);
    const ValueGrad vg = repulsion_loss(x, 0.07);
    Vec p(120), g(120);
    for (std::size_t i = 0; i < 40; ++i) {
      p.segment<3>(3 * i) = x[i];
      g.segment<3>(3 * i) = vg.grad[i];
    }
    const auto fn = [](const Vec& v) {
      PointCloud c;
      for (int i = 0; i < 40; ++i) c.push_back(v.segment<3>(3 * i));
      const ValueGrad r = repulsion_loss(c, 0.07);
      return Probe{r.value, r.signature};
    };
    CHECK(gradient_check(fn, p, g).max_rel_error <= 1e-5);
  }
}

TEST_CASE("density variance: equal interior neighbourhoods give zero") {
  PointCloud grid;
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 9; ++j)
      for (int k = 0; k < 9; ++k) grid.push_back(Vec3(i, j, k) * 0.1);
  const PointCloud centers = {Vec3(0.3, 0.3, 0.3), Vec3(0.4, 0.5, 0.4), Vec3(0.5, 0.5, 0.5)};
  CHECK(density_variance(grid, centers, 0.15) == 0.0);
}

TEST_CASE("density variance grows when half the points pile up") {
  Rng rng(7);
  const PointCloud x = oracle::random_cloud(200, rng);
  PointCloud spiked;
  for (std::size_t i = 0; i < x.size(); ++i) spiked.push_back(i % 2 ? x[i] : Vec3(0.1, 0.1, 0.1));
  CHECK(density_variance(spiked, 16, 0.3) > density_variance(x, 16, 0.3));
}

TEST_CASE("density variance equals a count-and-variance recomputation") {
  Rng rng(8);
  for (int t = 0; t < 10; ++t) {
    const PointCloud x = oracle::random_cloud(150, rng);
    const auto centers = oracle::fps(x, 12, 0);
    std::vector<double> counts;
    for (std::size_t c : centers) {
      double n = 0;
      for (const Vec3& p : x) n += (p - x[c]).norm() < 0.5;
      counts.push_back(n);
    }
    double mean = 0;
    for (double c : counts) mean += c;
    mean /= counts.size();
    double var = 0;
    for (double c : counts) var += (c - mean) * (c - mean);
    var /= counts.size();
    CHECK(density_variance(x, 12, 0.5) == doctest::Approx(var / mean).epsilon(1e-12));
  }
}
