#include "shapeinv/inversion.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>

#include "shapeinv/sampling.hpp"

namespace shapeinv {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

InversionSchedule staged(std::size_t per_stage) {
  InversionSchedule s;
  const double az[] = {1e-2, 1e-4, 1e-5, 1e-6};
  const double at[] = {2e-7, 1e-6, 1e-6, 2e-7};
  for (int i = 0; i < 4; ++i) s.stages.push_back({az[i], at[i], per_stage});
  return s;
}

const Discriminator* fd_disc(const Model& model, const LossWeights& w) {
  return w.fd != 0.0 ? &model.discriminator : nullptr;
}

}  // namespace

InversionSchedule InversionSchedule::thin() { return staged(200); }
InversionSchedule InversionSchedule::bulk() { return staged(30); }
InversionSchedule InversionSchedule::with_iterations(std::size_t per_stage) { return staged(per_stage); }

std::size_t InversionSchedule::total_iterations() const {
  std::size_t n = 0;
  for (const auto& s : stages) n += s.iterations;
  return n;
}

Model Model::from_checkpoint(const Checkpoint& c) {
  return {make_generator(c), make_discriminator(c)};
}

std::vector<Candidate> init_select(const PointCloud& x_in, const Model& model,
                                   const InversionOptions& options, std::size_t count) {
  validate(options.kind);
  const std::size_t d = model.generator.arch().latent_dim;
  const std::size_t m = model.generator.arch().points;
  std::vector<Candidate> pool;
  for (const Vec& z : options.planted) {
    if (static_cast<std::size_t>(z.size()) != d) {
      throw Error(ErrorCode::ShapeMismatch, "planted latent has the wrong dimension");
    }
    pool.push_back({{z, LatentCode::Origin::Planted}, 0.0, {}, pool.size()});
  }
  Rng rng = derive_rng(options.seed, 0);
  for (std::size_t i = 0; i < count; ++i) {
    pool.push_back({{sample_latent(d, rng), LatentCode::Origin::Sampled}, 0.0, {}, pool.size()});
  }
  if (pool.empty()) throw Error(ErrorCode::BadArgument, "init_select needs at least one candidate");

  const InversionTarget target = make_target(x_in, fd_disc(model, options.weights));
  constexpr std::size_t kChunk = 64;
  std::exception_ptr failure;
  for (std::size_t begin = 0; begin < pool.size(); begin += kChunk) {
    const std::size_t end = std::min(pool.size(), begin + kChunk);
    Mat z(static_cast<Eigen::Index>(end - begin), static_cast<Eigen::Index>(d));
    for (std::size_t i = begin; i < end; ++i) z.row(static_cast<Eigen::Index>(i - begin)) = pool[i].z.values.transpose();
    const Generator::Pass pass = model.generator.forward(z, false, false);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = static_cast<std::ptrdiff_t>(begin); i < static_cast<std::ptrdiff_t>(end); ++i) {
      Candidate& c = pool[static_cast<std::size_t>(i)];
      try {
        const PointCloud x_c = Generator::cloud_of(pass, static_cast<std::size_t>(i) - begin, m);
        if (!x_c.all_finite()) {
          c.loss = kInf;
          continue;
        }
        const InversionLoss l = inversion_loss(x_c, target, options.kind,
                                               fd_disc(model, options.weights), options.weights);
        c.breakdown = l.breakdown;
        c.loss = std::isfinite(l.breakdown.total) ? l.breakdown.total : kInf;
      } catch (const Error& e) {
        if (e.code() == ErrorCode::EmptyMask) {
          c.loss = kInf;
        } else {
#pragma omp critical
          if (!failure) failure = std::current_exception();
        }
      }
    }
    if (failure) std::rethrow_exception(failure);
  }
  std::stable_sort(pool.begin(), pool.end(),
                   [](const Candidate& a, const Candidate& b) { return a.loss < b.loss; });
  return pool;
}

InversionResult invert_from(const PointCloud& x_in, const Model& model,
                            const InversionOptions& options, const LatentCode& start) {
  validate(options.kind);
  if (options.schedule.stages.empty()) throw Error(ErrorCode::BadArgument, "schedule has no stages");
  const std::size_t m = model.generator.arch().points;
  if (static_cast<std::size_t>(start.values.size()) != model.generator.arch().latent_dim) {
    throw Error(ErrorCode::ShapeMismatch, "start latent has the wrong dimension");
  }
  const Discriminator* disc = fd_disc(model, options.weights);
  const InversionTarget target = make_target(x_in, disc);

  Generator gen = model.generator;
  Vec z = start.values;
  AdamState z_opt, theta_opt;

  InversionResult r;
  r.arch = gen.arch();
  double best = kInf;
  Vec best_z = z;
  NetParams best_theta = gen.params();
  std::size_t best_iter = 0;

  // Evaluates the current state, records it, and returns the pass and the
  // cloud gradient, or nothing when the run has to stop.
  auto evaluate = [&](bool need_grad) -> std::optional<std::pair<Generator::Pass, InversionLoss>> {
    Generator::Pass pass = gen.forward(z.transpose(), need_grad, need_grad);
    const PointCloud x_c = Generator::cloud_of(pass, 0, m);
    if (!x_c.all_finite()) {
      r.stop = StopReason::Diverged;
      return std::nullopt;
    }
    InversionLoss loss;
    try {
      loss = inversion_loss(x_c, target, options.kind, disc, options.weights);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::EmptyMask) throw;
      r.stop = StopReason::EmptyMask;
      return std::nullopt;
    }
    const double total = loss.breakdown.total;
    if (!std::isfinite(total)) {
      r.stop = StopReason::Diverged;
      return std::nullopt;
    }
    r.history.push_back(loss.breakdown);
    if (total < best) {
      best = total;
      best_z = z;
      best_theta = gen.params();
      best_iter = r.history.size() - 1;
    }
    return std::make_pair(std::move(pass), std::move(loss));
  };

  bool running = true;
  for (const InversionStage& stage : options.schedule.stages) {
    for (std::size_t it = 0; it < stage.iterations && running; ++it) {
      auto state = evaluate(true);
      if (!state) {
        running = false;
        break;
      }
      auto& [pass, loss] = *state;
      Mat d_out(static_cast<Eigen::Index>(m), 3);
      for (std::size_t i = 0; i < m; ++i) d_out.row(static_cast<Eigen::Index>(i)) = loss.grad[i].transpose();
      const Generator::Grads g = gen.backward(pass, d_out);
      Vec dz = g.dz.row(0).transpose();
      adam_step(z, dz, z_opt, stage.alpha_z, options.adam);
      adam_step(gen.params(), g.dparams, theta_opt, stage.alpha_theta, options.adam);
    }
  }
  if (running) evaluate(false);
  if (r.history.empty()) {
    throw Error(r.stop == StopReason::EmptyMask ? ErrorCode::EmptyMask : ErrorCode::Diverged,
                "the starting latent could not be evaluated");
  }

  r.init_loss = r.history.front().total;
  if (options.schedule.select_best_iterate || r.stop != StopReason::Completed) {
    r.best_iteration = best_iter;
    r.z_star = {best_z, LatentCode::Origin::Optimized};
    r.theta_star = std::move(best_theta);
  } else {
    r.best_iteration = r.history.size() - 1;
    r.z_star = {z, LatentCode::Origin::Optimized};
    r.theta_star = gen.params();
  }
  r.final_loss = r.history[r.best_iteration].total;
  r.x_c_star = Generator(r.arch, r.theta_star).generate(r.z_star.values);
  return r;
}

InversionResult invert(const PointCloud& x_in, const Model& model, const InversionOptions& options) {
  const std::vector<Candidate> pool = init_select(x_in, model, options, options.schedule.init_samples);
  if (!std::isfinite(pool.front().loss)) {
    throw Error(ErrorCode::EmptyMask, "no initial candidate produced a usable mask");
  }
  return invert_from(x_in, model, options, pool.front().z);
}

MultiResult multi_invert(const PointCloud& x_in, const Model& model, const InversionOptions& options,
                         std::size_t outputs, std::optional<double> loss_threshold) {
  if (outputs == 0) throw Error(ErrorCode::BadArgument, "outputs must be >= 1");
  const std::vector<Candidate> pool = init_select(x_in, model, options, options.schedule.init_samples);
  MultiResult out;
  out.loss_threshold = loss_threshold.value_or(1.5 * pool.front().loss);
  while (out.admitted < pool.size() && pool[out.admitted].loss < out.loss_threshold) ++out.admitted;
  if (out.admitted == 0) {
    throw Error(ErrorCode::NoCandidates,
                "no initial candidate has loss below " + std::to_string(out.loss_threshold) +
                    " (best " + std::to_string(pool.front().loss) + "); raise the loss threshold");
  }
  const std::size_t d = model.generator.arch().latent_dim;
  Mat rows(static_cast<Eigen::Index>(out.admitted), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < out.admitted; ++i) rows.row(static_cast<Eigen::Index>(i)) = pool[i].z.values.transpose();
  const FpsResult fps = farthest_point_sample_rows(rows, std::min(outputs, out.admitted), 0);
  for (std::size_t idx : fps.order) {
    Candidate c = pool[idx];
    c.z.origin = LatentCode::Origin::FpsSelected;
    out.starts.push_back(c);
  }
  std::vector<std::optional<InversionResult>> results(out.starts.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(out.starts.size()); ++i) {
    try {
      results[static_cast<std::size_t>(i)] = invert_from(x_in, model, options, out.starts[static_cast<std::size_t>(i)].z);
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (results[i] && results[i]->final_loss < out.loss_threshold) {
      out.results.push_back(std::move(*results[i]));
      out.start_of.push_back(i);
    }
  }
  return out;
}

std::vector<Vec> jitter_latents(const InversionResult& result, double magnitude, std::size_t count,
                                std::uint64_t seed) {
  if (!(magnitude >= 0.0) || !std::isfinite(magnitude)) {
    throw Error(ErrorCode::BadArgument, "jitter magnitude must be finite and >= 0");
  }
  Rng rng = derive_rng(seed, 0);
  std::vector<Vec> out;
  for (std::size_t i = 0; i < count; ++i) {
    const Vec eta = sample_latent(result.arch.latent_dim, rng);
    out.push_back(result.z_star.values + magnitude * eta);
  }
  return out;
}

std::vector<PointCloud> jitter(const InversionResult& result, double magnitude, std::size_t count,
                               std::uint64_t seed) {
  const Generator gen(result.arch, result.theta_star);
  std::vector<PointCloud> out;
  for (const Vec& z : jitter_latents(result, magnitude, count, seed)) out.push_back(gen.generate(z));
  return out;
}

std::vector<PointCloud> morph(const InversionResult& a, const InversionResult& b, std::size_t steps) {
  if (steps < 2) throw Error(ErrorCode::BadArgument, "morph needs at least 2 steps");
  if (a.arch != b.arch || !a.theta_star.same_layout(b.theta_star) ||
      a.z_star.values.size() != b.z_star.values.size()) {
    throw Error(ErrorCode::ArchMismatch, "morph endpoints come from different architectures");
  }
  std::vector<PointCloud> out;
  for (std::size_t i = 0; i < steps; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(steps - 1);
    const Vec z = (1.0 - t) * a.z_star.values + t * b.z_star.values;
    out.push_back(Generator(a.arch, lerp(a.theta_star, b.theta_star, t)).generate(z));
  }
  return out;
}

Checkpoint result_checkpoint(const InversionResult& result, const Model& model) {
  Checkpoint c;
  c.generator_arch = result.arch;
  c.generator = result.theta_star;
  c.discriminator_arch = model.discriminator.arch();
  c.discriminator = model.discriminator.params();
  Mat losses(1, 2);
  losses << result.init_loss, result.final_loss;
  c.extras = NetParams({{"latent.z", result.z_star.values.transpose()}, {"result.losses", losses}});
  return c;
}

InversionResult result_from_checkpoint(const Checkpoint& c) {
  const Tensor* z = c.extras.find("latent.z");
  if (z == nullptr || z->value.rows() != 1 ||
      static_cast<std::size_t>(z->value.cols()) != c.generator_arch.latent_dim) {
    throw Error(ErrorCode::CheckpointError, "checkpoint holds no inverted latent code");
  }
  InversionResult r;
  r.arch = c.generator_arch;
  r.theta_star = c.generator;
  r.z_star = {z->value.row(0).transpose(), LatentCode::Origin::Optimized};
  if (const Tensor* l = c.extras.find("result.losses"); l != nullptr && l->value.size() == 2) {
    r.init_loss = l->value(0, 0);
    r.final_loss = l->value(0, 1);
  }
  r.x_c_star = Generator(r.arch, r.theta_star).generate(r.z_star.values);
  return r;
}

}  // namespace shapeinv
