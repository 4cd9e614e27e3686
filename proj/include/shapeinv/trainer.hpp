#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "shapeinv/adam.hpp"
#include "shapeinv/checkpoint.hpp"
#include "shapeinv/nets.hpp"
#include "shapeinv/objective.hpp"

namespace shapeinv {

enum class Uniformity { None, PatchVariance, Repulsion };

std::string to_string(Uniformity u);
/// Accepts none, patch_variance, repulsion. Throws BadArgument.
Uniformity uniformity_from_name(const std::string& name);

struct TrainConfig {
  std::size_t epochs = 300;
  std::size_t batch_size = 32;
  /// Generator steps per epoch; 0 means one pass over the dataset.
  std::size_t steps_per_epoch = 0;
  double lr_g = 5e-4;
  double lr_d = 5e-4;
  std::size_t critic_steps = 5;
  double gp_weight = 10.0;
  Uniformity uniformity = Uniformity::None;
  double uniform_weight = 1.0;
  PatchSpec patch;
  double repulsion_radius = 0.07;
  /// Lower moment decays than the inversion optimizer; the adversarial game
  /// oscillates with (0.9, 0.999).
  AdamConfig adam_g{0.5, 0.9};
  AdamConfig adam_d{0.5, 0.9};
  GeneratorArch generator;
  DiscriminatorArch discriminator;
  std::uint64_t seed = 0;
};

/// Hash of every field that shapes the training trajectory except `epochs`,
/// so a finished run can be extended by resuming with a larger epoch count.
std::uint64_t config_hash(const TrainConfig& config);

struct EpochRecord {
  std::size_t epoch = 0;
  double critic_loss = 0.0;     // mean over critic steps, penalty included
  double wasserstein = 0.0;     // mean of D(real) - D(fake)
  double gradient_penalty = 0.0;
  double generator_adv = 0.0;   // mean of -D(G(z))
  double uniform = 0.0;         // unweighted uniformity term, 0 when unused
  double patch_var = 0.0;       // PatchVariance of generated clouds (monitor)
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochRecord> history;
  bool diverged = false;
};

using EpochCallback = std::function<void(const EpochRecord&, const Checkpoint&)>;

/// WGAN-GP training with the selected uniformity term added to the
/// generator loss. With `resume`, continues from its epoch count; the config
/// hash must match. On a non-finite loss or parameter the run stops and the
/// checkpoint from the end of the last good epoch is returned.
TrainResult train_gan(const std::vector<PointCloud>& dataset, const TrainConfig& config,
                      const Checkpoint* resume = nullptr, const EpochCallback& on_epoch = {});

/// Sum over point pairs closer than h of (h - r) exp(-r^2 / h^2), divided by
/// the point count. Coincident points are pushed apart along x.
ValueGrad repulsion_loss(const PointCloud& x, double h);

/// Counts points strictly within `radius` of each of `probes` FPS centres
/// (the centre included) and returns variance / mean of the counts.
double density_variance(const PointCloud& x, std::size_t probes, double radius);
/// Same statistic around explicit centres.
double density_variance(const PointCloud& x, const PointCloud& centers, double radius);

}  // namespace shapeinv
