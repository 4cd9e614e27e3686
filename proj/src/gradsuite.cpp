#include "shapeinv/gradsuite.hpp"

#include <algorithm>
#include <functional>
#include <random>

#include "shapeinv/degradation.hpp"
#include "shapeinv/gradcheck.hpp"
#include "shapeinv/hash.hpp"
#include "shapeinv/nets.hpp"
#include "shapeinv/objective.hpp"
#include "shapeinv/random.hpp"

namespace shapeinv {

namespace {

Vec flatten(const PointCloud& c) {
  Vec v(static_cast<Eigen::Index>(3 * c.size()));
  for (std::size_t i = 0; i < c.size(); ++i) v.segment<3>(static_cast<Eigen::Index>(3 * i)) = c[i];
  return v;
}

Vec flatten(const CloudGrad& g) {
  Vec v(static_cast<Eigen::Index>(3 * g.size()));
  for (std::size_t i = 0; i < g.size(); ++i) v.segment<3>(static_cast<Eigen::Index>(3 * i)) = g[i];
  return v;
}

PointCloud unflatten(const Vec& v) {
  PointCloud c;
  for (Eigen::Index i = 0; i + 2 < v.size(); i += 3) c.push_back(v.segment<3>(i));
  return c;
}

PointCloud random_cloud(std::size_t n, Rng& rng) {
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) c.push_back(Vec3(u(rng), u(rng), u(rng)));
  return c;
}

std::size_t between(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

Mat random_mat(Eigen::Index r, Eigen::Index c, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

struct Runner {
  const SuiteOptions& opts;

  void check(SuiteEntry& e, const ProbeFn& fn, const Vec& point, const Vec& analytic,
             std::size_t max_coords, std::uint64_t seed) const {
    GradCheckOptions g;
    g.step = opts.step;
    g.max_coords = max_coords;
    g.seed = seed;
    const GradCheckReport r = gradient_check(fn, point, analytic, g);
    e.checked += r.checked;
    e.skipped += r.skipped;
    e.worst = std::max(e.worst, r.max_rel_error);
  }
};

// Every tape primitive in one scalar: inputs x (4x5), w (5x3), b (1x3).
Probe tape_probe(const Vec& v, Vec* grad) {
  Tape t;
  const Mat x = Eigen::Map<const Mat>(v.data(), 4, 5);
  const Mat w = Eigen::Map<const Mat>(v.data() + 20, 5, 3);
  const Mat b = Eigen::Map<const Mat>(v.data() + 35, 1, 3);
  const Tape::Id ix = t.leaf(x, true);
  const Tape::Id iw = t.leaf(w, true);
  const Tape::Id ib = t.leaf(b, true);
  const Tape::Id h = t.leaky_relu(t.affine(ix, iw, ib), 0.2);
  const Tape::Id th = t.tanh(h);
  const Tape::Id r = t.reshape(th, 6, 2);
  const Tape::Id pooled = t.max_pool(r, 3);
  const Tape::Id shifted = t.sub(pooled, t.leaf(Mat::Constant(2, 2, 0.1), false));
  const Tape::Id a1 = t.sub(t.l1(shifted), t.variance(h));
  const Tape::Id a2 = t.sub(t.sq_norm(th), t.mean(r));
  const Tape::Id total = t.sub(t.sub(a1, a2), t.sum(h));
  Probe p{t.scalar(total), t.signature()};
  if (grad != nullptr) {
    t.backward(total);
    Vec g(38);
    g.segment(0, 20) = Eigen::Map<const Vec>(t.grad(ix).data(), 20);
    g.segment(20, 15) = Eigen::Map<const Vec>(t.grad(iw).data(), 15);
    g.segment(35, 3) = Eigen::Map<const Vec>(t.grad(ib).data(), 3);
    *grad = g;
  }
  return p;
}

}  // namespace

std::vector<SuiteEntry> run_gradient_suite(const SuiteOptions& o) {
  const Runner run{o};
  std::vector<SuiteEntry> out;
  auto entry = [&](const std::string& name, const std::function<void(SuiteEntry&, Rng&, std::size_t)>& body) {
    SuiteEntry e;
    e.name = name;
    for (std::size_t c = 0; c < o.configs; ++c) {
      Fnv1a h;
      h.str(name);
      Rng rng = derive_rng(o.seed, h.value() ^ c);
      body(e, rng, c);
      ++e.configs;
    }
    e.pass = e.checked > 0 && e.worst <= o.tolerance;
    out.push_back(e);
  };

  entry("tape_primitives", [&](SuiteEntry& e, Rng& rng, std::size_t c) {
    const Vec v = random_mat(38, 1, rng);
    Vec g;
    tape_probe(v, &g);
    run.check(e, [](const Vec& x) { return tape_probe(x, nullptr); }, v, g, 0, c);
  });

  entry("chamfer_cd_t", [&](SuiteEntry& e, Rng& rng, std::size_t c) {
    const PointCloud a = random_cloud(between(rng, 4, 40), rng);
    const PointCloud b = random_cloud(between(rng, 4, 48), rng);
    const ValueGrad vg = chamfer_cd_t(a, b);
    run.check(e, [&](const Vec& x) {
      const ValueGrad r = chamfer_cd_t(unflatten(x), b);
      return Probe{r.value, r.signature};
    }, flatten(a), flatten(vg.grad), 0, c);
  });

  entry("patch_variance", [&](SuiteEntry& e, Rng& rng, std::size_t c) {
    const PointCloud x = random_cloud(between(rng, 64, 256), rng);
    PatchSpec spec;
    spec.n_patches = between(rng, 2, 40);
    spec.pts_per_patch = between(rng, 3, 30);
    spec.fps_start = between(rng, 0, x.size() - 1);
    const ValueGrad vg = patch_variance(x, spec);
    run.check(e, [&](const Vec& v) {
      const ValueGrad r = patch_variance(unflatten(v), spec);
      return Probe{r.value, r.signature};
    }, flatten(x), flatten(vg.grad), 96, c);
  });

  entry("feature_distance", [&](SuiteEntry& e, Rng& rng, std::size_t c) {
    const Discriminator d({}, Discriminator::init_params({}, rng));
    const PointCloud a = random_cloud(between(rng, 1, 32), rng);
    const PointCloud b = random_cloud(between(rng, 1, 32), rng);
    const ValueGrad vg = feature_distance(d, a, b);
    const Vec fb = discriminator_forward(d, b).feature;
    run.check(e, [&](const Vec& v) {
      const ValueGrad r = feature_distance(d, unflatten(v), fb);
      return Probe{r.value, r.signature};
    }, flatten(a), flatten(vg.grad), 0, c);
  });

  entry("uhd_term", [&](SuiteEntry& e, Rng& rng, std::size_t c) {
    const PointCloud x_in = random_cloud(between(rng, 1, 32), rng);
    const PointCloud x_c = random_cloud(between(rng, 1, 48), rng);
    const ValueGrad vg = uhd_term(x_in, x_c);
    run.check(e, [&](const Vec& v) {
      const ValueGrad r = uhd_term(x_in, unflatten(v));
      return Probe{r.value, r.signature};
    }, flatten(x_c), flatten(vg.grad), 0, c);
  });

  entry("inversion_loss", [&](SuiteEntry& e, Rng& rng, std::size_t c) {
    const Discriminator d({}, Discriminator::init_params({}, rng));
    const PointCloud x_c = random_cloud(between(rng, 16, 64), rng);
    const PointCloud x_in = random_cloud(between(rng, 4, 24), rng);
    const DegradationKind kinds[] = {KMask{between(rng, 1, 5)}, TauMask{0.2}, VoxelMask{4}};
    const DegradationKind kind = kinds[c % 3];
    const IndexSet sel = degrade(x_in, x_c, kind).selected;
    if (sel.empty()) return;
    const LossWeights w{1.0, 1.0, 1.0};
    const InversionTarget target = make_target(x_in, &d);
    const InversionLoss l = inversion_loss_with_selection(x_c, target, sel, &d, w);
    run.check(e, [&](const Vec& v) {
      const InversionLoss r = inversion_loss_with_selection(unflatten(v), target, sel, &d, w);
      return Probe{r.breakdown.total, r.signature};
    }, flatten(x_c), flatten(l.grad), 0, c);
  });

  entry("generator", [&](SuiteEntry& e, Rng& rng, std::size_t c) {
    GeneratorArch arch;
    arch.points = between(rng, 4, 32);
    const Generator gen(arch, Generator::init_params(arch, rng));
    const Vec z = random_mat(static_cast<Eigen::Index>(arch.latent_dim), 1, rng);
    const Mat weight = random_mat(static_cast<Eigen::Index>(arch.points), 3, rng);
    // Downstream scalar: sum(weight o out) + 0.5 |out|^2.
    auto loss = [&](const Generator& g, const Vec& zz, Vec* dz, Vec* dtheta) {
      Generator::Pass p = g.forward(zz.transpose(), dz != nullptr, dtheta != nullptr);
      const Mat& out = p.tape.value(p.out);
      Probe pr{weight.cwiseProduct(out).sum() + 0.5 * out.squaredNorm(), p.tape.signature()};
      if (dz != nullptr) {
        const Generator::Grads gr = g.backward(p, weight + out);
        *dz = gr.dz.row(0).transpose();
        *dtheta = gr.dparams.flatten();
      }
      return pr;
    };
    Vec dz, dtheta;
    loss(gen, z, &dz, &dtheta);
    run.check(e, [&](const Vec& v) { return loss(gen, v, nullptr, nullptr); }, z, dz, 0, c);
    const Vec theta = gen.params().flatten();
    run.check(e, [&](const Vec& v) {
      Generator g2 = gen;
      g2.params().unflatten(v);
      return loss(g2, z, nullptr, nullptr);
    }, theta, dtheta, 64, c);
  });

  entry("discriminator", [&](SuiteEntry& e, Rng& rng, std::size_t c) {
    const Discriminator d({}, Discriminator::init_params({}, rng));
    const std::size_t batch = between(rng, 1, 3);
    const Mat pts = 0.5 * random_mat(static_cast<Eigen::Index>(batch * between(rng, 1, 16)), 3, rng);
    const Mat seed = random_mat(static_cast<Eigen::Index>(batch), 1, rng);
    auto score = [&](const Discriminator& dd, const Mat& x, Discriminator::Grads* g) {
      Discriminator::Pass p = dd.forward(x, batch, g != nullptr, g != nullptr);
      Probe pr{p.tape.value(p.score).cwiseProduct(seed).sum(), p.tape.signature()};
      if (g != nullptr) *g = dd.backward(p, p.score, seed);
      return pr;
    };
    Discriminator::Grads g;
    score(d, pts, &g);
    const Vec flat_pts = Eigen::Map<const Vec>(pts.data(), pts.size());
    run.check(e, [&](const Vec& v) {
      return score(d, Eigen::Map<const Mat>(v.data(), pts.rows(), 3), nullptr);
    }, flat_pts, Eigen::Map<const Vec>(g.dinput.data(), g.dinput.size()), 0, c);
    run.check(e, [&](const Vec& v) {
      Discriminator d2 = d;
      d2.params().unflatten(v);
      return score(d2, pts, nullptr);
    }, d.params().flatten(), g.dparams.flatten(), 64, c);
  });

  entry("gradient_penalty", [&](SuiteEntry& e, Rng& rng, std::size_t c) {
    const Discriminator d({}, Discriminator::init_params({}, rng));
    const std::size_t batch = between(rng, 1, 3);
    const Mat pts = 0.5 * random_mat(static_cast<Eigen::Index>(batch * between(rng, 1, 16)), 3, rng);
    const Discriminator::Penalty pen = d.gradient_penalty(pts, batch);
    run.check(e, [&](const Vec& v) {
      Discriminator d2 = d;
      d2.params().unflatten(v);
      const Discriminator::Pass p = d2.forward(pts, batch, false, false);
      return Probe{d2.gradient_penalty(pts, batch).value, p.tape.signature()};
    }, d.params().flatten(), pen.dparams.flatten(), 64, c);
  });

  return out;
}

}  // namespace shapeinv
