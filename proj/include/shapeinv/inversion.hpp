#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "shapeinv/adam.hpp"
#include "shapeinv/checkpoint.hpp"
#include "shapeinv/degradation.hpp"
#include "shapeinv/nets.hpp"
#include "shapeinv/objective.hpp"

namespace shapeinv {

struct InversionStage {
  double alpha_z = 1e-2;
  double alpha_theta = 2e-7;
  std::size_t iterations = 200;
};

struct InversionSchedule {
  std::vector<InversionStage> stages;
  std::size_t init_samples = 256;
  bool select_best_iterate = true;

  /// Four stages with z rates 1e-2..1e-6 and theta rates 2e-7..1e-6.
  static InversionSchedule thin();   // 200 iterations per stage
  static InversionSchedule bulk();   // 30 iterations per stage
  static InversionSchedule with_iterations(std::size_t per_stage);
  std::size_t total_iterations() const;
};

/// A trained (G, D) pair. Inversion jobs copy G's parameters before tuning,
/// so one model can be shared read-only.
struct Model {
  Generator generator;
  Discriminator discriminator;

  static Model from_checkpoint(const Checkpoint& c);
};

struct InversionOptions {
  DegradationKind kind = KMask{};
  LossWeights weights;
  InversionSchedule schedule = InversionSchedule::thin();
  std::uint64_t seed = 0;
  /// Extra latents placed at the front of the candidate pool.
  std::vector<Vec> planted;
  AdamConfig adam;
};

struct Candidate {
  LatentCode z;
  double loss = 0.0;  // +inf when the mask kept nothing
  LossBreakdown breakdown;
  std::size_t pool_index = 0;
};

/// Evaluates planted latents followed by `count` standard-normal draws with
/// frozen parameters and returns them sorted by total loss (pool order on
/// ties).
std::vector<Candidate> init_select(const PointCloud& x_in, const Model& model,
                                   const InversionOptions& options, std::size_t count);

enum class StopReason { Completed, Diverged, EmptyMask };

struct InversionResult {
  LatentCode z_star;
  GeneratorArch arch;
  NetParams theta_star;
  PointCloud x_c_star;
  /// history[0] is the starting point, then one entry after each update.
  std::vector<LossBreakdown> history;
  double init_loss = 0.0;
  double final_loss = 0.0;
  std::size_t best_iteration = 0;
  StopReason stop = StopReason::Completed;
};

/// Joint Adam on z and theta, staged learning rates, starting from `start`.
InversionResult invert_from(const PointCloud& x_in, const Model& model,
                            const InversionOptions& options, const LatentCode& start);
/// Starts from the best init_select candidate.
InversionResult invert(const PointCloud& x_in, const Model& model, const InversionOptions& options);

struct MultiResult {
  /// Only results whose final loss stays below the threshold are kept;
  /// start_of[i] is the index in `starts` that results[i] came from.
  std::vector<InversionResult> results;
  std::vector<std::size_t> start_of;
  std::vector<Candidate> starts;
  double loss_threshold = 0.0;
  std::size_t admitted = 0;  // candidates below the threshold
};

/// Candidates with loss below the threshold (default 1.5x the best init
/// loss) seed a latent-space FPS that starts at the best one; each chosen
/// start is inverted independently. Throws NoCandidates.
MultiResult multi_invert(const PointCloud& x_in, const Model& model, const InversionOptions& options,
                         std::size_t outputs, std::optional<double> loss_threshold = std::nullopt);

/// z* + magnitude * eta, eta standard normal, one per requested sample.
std::vector<Vec> jitter_latents(const InversionResult& result, double magnitude, std::size_t count,
                                std::uint64_t seed);
/// G(z* + magnitude * eta; theta*) for the latents above.
std::vector<PointCloud> jitter(const InversionResult& result, double magnitude, std::size_t count,
                               std::uint64_t seed);
/// Joint interpolation of latent and parameters, t = 0, 1/(steps-1), ..., 1.
std::vector<PointCloud> morph(const InversionResult& a, const InversionResult& b, std::size_t steps);

/// The result's generator, parameters and latent packed for storage.
Checkpoint result_checkpoint(const InversionResult& result, const Model& model);
InversionResult result_from_checkpoint(const Checkpoint& c);

}  // namespace shapeinv
