#include "shapeinv/trainer.hpp"

#include <bit>
#include <cmath>
#include <limits>

#include "shapeinv/hash.hpp"
#include "shapeinv/sampling.hpp"

namespace shapeinv {

namespace {

Mat stack(const std::vector<PointCloud>& clouds, const std::vector<std::size_t>& pick) {
  const auto m = static_cast<Eigen::Index>(clouds[pick[0]].size());
  Mat out(m * static_cast<Eigen::Index>(pick.size()), 3);
  for (std::size_t b = 0; b < pick.size(); ++b) {
    out.middleRows(static_cast<Eigen::Index>(b) * m, m) = clouds[pick[b]].to_matrix();
  }
  return out;
}

Mat normal_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Mat z(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = n(rng);
  return z;
}

void add_scaled(NetParams& acc, const NetParams& g, double s) {
  for (std::size_t i = 0; i < acc.count(); ++i) acc[i].value += s * g[i].value;
}

bool finite(double v) { return std::isfinite(v); }

struct Uniform {
  double value = 0.0;
  CloudGrad grad;
};

Uniform uniformity_term(const TrainConfig& cfg, const PointCloud& x) {
  if (cfg.uniformity == Uniformity::PatchVariance) {
    ValueGrad vg = patch_variance(x, cfg.patch);
    return {vg.value, std::move(vg.grad)};
  }
  ValueGrad vg = repulsion_loss(x, cfg.repulsion_radius);
  return {vg.value, std::move(vg.grad)};
}

}  // namespace

std::string to_string(Uniformity u) {
  switch (u) {
    case Uniformity::None: return "none";
    case Uniformity::PatchVariance: return "patch_variance";
    case Uniformity::Repulsion: return "repulsion";
  }
  return "none";
}

Uniformity uniformity_from_name(const std::string& name) {
  if (name == "none") return Uniformity::None;
  if (name == "patch_variance") return Uniformity::PatchVariance;
  if (name == "repulsion") return Uniformity::Repulsion;
  throw Error(ErrorCode::BadArgument, "unknown uniformity loss '" + name + "'");
}

std::uint64_t config_hash(const TrainConfig& c) {
  Fnv1a h;
  auto f = [&h](double v) { h.u64(std::bit_cast<std::uint64_t>(v)); };
  h.u64(c.batch_size);
  h.u64(c.steps_per_epoch);
  f(c.lr_g);
  f(c.lr_d);
  h.u64(c.critic_steps);
  f(c.gp_weight);
  h.u64(static_cast<std::uint64_t>(c.uniformity));
  f(c.uniform_weight);
  h.u64(c.patch.n_patches);
  h.u64(c.patch.pts_per_patch);
  h.u64(c.patch.fps_start);
  f(c.repulsion_radius);
  for (const AdamConfig& a : {c.adam_g, c.adam_d}) {
    f(a.beta1);
    f(a.beta2);
    f(a.eps);
  }
  h.u64(c.generator.latent_dim);
  h.u64(c.generator.points);
  for (std::size_t w : c.generator.hidden) h.u64(w);
  f(c.generator.slope);
  for (std::size_t w : c.discriminator.point_widths) h.u64(w);
  h.u64(0);
  for (std::size_t w : c.discriminator.head_widths) h.u64(w);
  f(c.discriminator.slope);
  h.u64(c.seed);
  return h.value();
}

TrainResult train_gan(const std::vector<PointCloud>& dataset, const TrainConfig& cfg,
                      const Checkpoint* resume, const EpochCallback& on_epoch) {
  if (dataset.empty()) throw Error(ErrorCode::EmptyCloud, "training set is empty");
  if (cfg.batch_size == 0 || cfg.critic_steps == 0) {
    throw Error(ErrorCode::BadArgument, "batch size and critic steps must be positive");
  }
  if (!(cfg.lr_g > 0.0 && cfg.lr_d > 0.0 && cfg.gp_weight >= 0.0 && cfg.uniform_weight >= 0.0)) {
    throw Error(ErrorCode::BadArgument, "learning rates must be positive, weights non-negative");
  }
  const std::size_t m = cfg.generator.points;
  for (const PointCloud& c : dataset) {
    if (c.size() != m) {
      throw Error(ErrorCode::ShapeMismatch, "training clouds must have " + std::to_string(m) + " points");
    }
    require_valid(c, "training cloud");
  }

  if (m < cfg.patch.n_patches || m < cfg.patch.pts_per_patch + 1) {
    throw Error(ErrorCode::CloudTooSmall, "generated clouds are too small for the patch settings");
  }

  const std::uint64_t hash = config_hash(cfg);
  TrainResult result;
  if (resume != nullptr) {
    if (resume->config_hash != hash || resume->generator_arch != cfg.generator ||
        resume->discriminator_arch != cfg.discriminator) {
      throw Error(ErrorCode::ConfigError, "checkpoint was trained with a different configuration");
    }
    result.checkpoint = *resume;
  } else {
    result.checkpoint = init_checkpoint(cfg.generator, cfg.discriminator, cfg.seed);
    result.checkpoint.config_hash = hash;
  }
  Checkpoint& ck = result.checkpoint;

  const std::size_t B = cfg.batch_size;
  const std::size_t steps =
      cfg.steps_per_epoch > 0 ? cfg.steps_per_epoch : (dataset.size() + B - 1) / B;
  const double inv_b = 1.0 / static_cast<double>(B);

  for (std::size_t epoch = ck.epochs_done; epoch < cfg.epochs; ++epoch) {
    Rng rng = derive_rng(cfg.seed, epoch + 1);
    std::uniform_int_distribution<std::size_t> pick_sample(0, dataset.size() - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const Checkpoint last_good = ck;
    Generator gen = make_generator(ck);
    Discriminator disc = make_discriminator(ck);
    EpochRecord rec;
    rec.epoch = epoch;
    bool bad = false;

    for (std::size_t step = 0; step < steps && !bad; ++step) {
      for (std::size_t c = 0; c < cfg.critic_steps; ++c) {
        std::vector<std::size_t> pick(B);
        for (auto& p : pick) p = pick_sample(rng);
        const Mat real = stack(dataset, pick);
        const Mat z = normal_matrix(B, cfg.generator.latent_dim, rng);
        const Generator::Pass gp = gen.forward(z, false, false);
        const Mat fake = gp.tape.value(gp.out);

        Discriminator::Pass pr = disc.forward(real, B, false, true);
        Discriminator::Pass pf = disc.forward(fake, B, false, true);
        const double d_real = pr.tape.value(pr.score).mean();
        const double d_fake = pf.tape.value(pf.score).mean();
        NetParams grad = disc.backward(pr, pr.score, Mat::Constant(static_cast<Eigen::Index>(B), 1, -inv_b)).dparams;
        add_scaled(grad, disc.backward(pf, pf.score, Mat::Constant(static_cast<Eigen::Index>(B), 1, inv_b)).dparams, 1.0);

        Mat mix(real.rows(), 3);
        for (std::size_t b = 0; b < B; ++b) {
          const double e = unit(rng);
          const auto rows = static_cast<Eigen::Index>(m);
          const auto off = static_cast<Eigen::Index>(b) * rows;
          mix.middleRows(off, rows) = e * real.middleRows(off, rows) + (1.0 - e) * fake.middleRows(off, rows);
        }
        const Discriminator::Penalty pen = disc.gradient_penalty(mix, B);
        add_scaled(grad, pen.dparams, cfg.gp_weight);

        const double loss = d_fake - d_real + cfg.gp_weight * pen.value;
        rec.critic_loss += loss;
        rec.wasserstein += d_real - d_fake;
        rec.gradient_penalty += pen.value;
        adam_step(disc.params(), grad, ck.discriminator_opt, cfg.lr_d, cfg.adam_d);
        if (!finite(loss) || !disc.params().all_finite()) {
          bad = true;
          break;
        }
      }
      if (bad) break;

      const Mat z = normal_matrix(B, cfg.generator.latent_dim, rng);
      Generator::Pass gp = gen.forward(z, false, true);
      const Mat fake = gp.tape.value(gp.out);
      Discriminator::Pass pf = disc.forward(fake, B, true, false);
      const double adv = -pf.tape.value(pf.score).mean();
      Mat d_out = disc.backward(pf, pf.score, Mat::Constant(static_cast<Eigen::Index>(B), 1, -inv_b)).dinput;

      std::vector<double> term(B, 0.0);
      const bool uniform = cfg.uniformity != Uniformity::None;
      const bool monitor = step == 0;
      if (uniform || monitor) {
        std::vector<double> pv(B, 0.0);
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(B); ++b) {
          const auto bi = static_cast<std::size_t>(b);
          const PointCloud x = Generator::cloud_of(gp, bi, m);
          if (!x.all_finite()) {
            term[bi] = std::numeric_limits<double>::quiet_NaN();
            continue;
          }
          if (uniform) {
            const Uniform u = uniformity_term(cfg, x);
            term[bi] = u.value;
            const double s = cfg.uniform_weight * inv_b;
            const auto off = static_cast<Eigen::Index>(bi * m);
            for (std::size_t i = 0; i < m; ++i) {
              d_out.row(off + static_cast<Eigen::Index>(i)) += s * u.grad[i].transpose();
            }
          }
          if (monitor) pv[bi] = patch_variance(x, cfg.patch).value;
        }
        for (double v : pv) rec.patch_var += v * inv_b;
      }
      double uni = 0.0;
      for (double v : term) uni += v * inv_b;
      rec.generator_adv += adv;
      rec.uniform += uni;

      const Generator::Grads g = gen.backward(gp, d_out);
      adam_step(gen.params(), g.dparams, ck.generator_opt, cfg.lr_g, cfg.adam_g);
      if (!finite(adv) || !finite(uni) || !gen.params().all_finite()) bad = true;
    }

    if (bad) {
      result.checkpoint = last_good;
      result.diverged = true;
      return result;
    }
    const double cs = static_cast<double>(steps * cfg.critic_steps);
    rec.critic_loss /= cs;
    rec.wasserstein /= cs;
    rec.gradient_penalty /= cs;
    rec.generator_adv /= static_cast<double>(steps);
    rec.uniform /= static_cast<double>(steps);
    ck.generator = gen.params();
    ck.discriminator = disc.params();
    ck.epochs_done = epoch + 1;
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec, ck);
  }
  return result;
}

ValueGrad repulsion_loss(const PointCloud& x, double h) {
  require_valid(x, "repulsion cloud");
  if (!(h > 0.0)) throw Error(ErrorCode::BadArgument, "repulsion radius must be > 0");
  ValueGrad out;
  out.grad = zero_grad(x.size());
  const double inv_n = 1.0 / static_cast<double>(x.size());
  const double h2 = h * h;
  Fnv1a sig;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const double r2 = squared_distance(x[i], x[j]);
      if (r2 >= h2) continue;
      sig.u64(i);
      sig.u64(j);
      const double r = std::sqrt(r2);
      const double e = std::exp(-r2 / h2);
      out.value += (h - r) * e * inv_n;
      const double dphi = -e * (1.0 + 2.0 * r * (h - r) / h2);
      const Vec3 dir = r > 0.0 ? Vec3((x[i] - x[j]) / r) : Vec3::UnitX();
      out.grad[i] += inv_n * dphi * dir;
      out.grad[j] -= inv_n * dphi * dir;
    }
  }
  out.signature = sig.value();
  return out;
}

double density_variance(const PointCloud& x, const PointCloud& centers, double radius) {
  require_valid(x, "density cloud");
  require_valid(centers, "density centres");
  if (centers.size() < 2) throw Error(ErrorCode::CloudTooSmall, "density_variance needs >= 2 probes");
  if (!(radius > 0.0)) throw Error(ErrorCode::BadArgument, "radius must be > 0");
  const double r2 = radius * radius;
  std::vector<double> counts;
  for (const Vec3& c : centers) {
    std::size_t n = 0;
    for (const Vec3& p : x) n += squared_distance(p, c) < r2 ? 1 : 0;
    counts.push_back(static_cast<double>(n));
  }
  double mean = 0.0;
  for (double c : counts) mean += c;
  mean /= static_cast<double>(counts.size());
  double var = 0.0;
  for (double c : counts) var += (c - mean) * (c - mean);
  var /= static_cast<double>(counts.size());
  return mean > 0.0 ? var / mean : 0.0;
}

double density_variance(const PointCloud& x, std::size_t probes, double radius) {
  require_valid(x, "density cloud");
  if (probes < 2) throw Error(ErrorCode::CloudTooSmall, "density_variance needs >= 2 probes");
  if (probes > x.size()) {
    throw Error(ErrorCode::CloudTooSmall, "more probes than points");
  }
  return density_variance(x, gather(x, farthest_point_sample(x, probes).selected), radius);
}

}  // namespace shapeinv
