#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "shapeinv/cloud.hpp"
#include "shapeinv/random.hpp"
#include "shapeinv/tape.hpp"

namespace shapeinv {

/// Latent code z with a note on where it came from.
struct LatentCode {
  enum class Origin { Sampled, Planted, FpsSelected, Interpolated, Optimized };
  Vec values;
  Origin origin = Origin::Sampled;
};

struct Tensor {
  std::string name;
  Mat value;
};

/// Ordered named tensors. The flat view concatenates tensors in order, each
/// in row-major element order.
class NetParams {
 public:
  NetParams() = default;
  explicit NetParams(std::vector<Tensor> tensors) : tensors_(std::move(tensors)) {}

  std::size_t count() const noexcept { return tensors_.size(); }
  std::size_t flat_size() const;
  const Tensor& operator[](std::size_t i) const { return tensors_[i]; }
  Tensor& operator[](std::size_t i) { return tensors_[i]; }
  const std::vector<Tensor>& tensors() const noexcept { return tensors_; }
  const Tensor* find(const std::string& name) const;

  Vec flatten() const;
  /// Throws ShapeMismatch when flat.size() != flat_size().
  void unflatten(const Vec& flat);

  /// Same names and shapes, all zeros.
  NetParams zeros_like() const;
  bool same_layout(const NetParams& other) const;
  bool all_finite() const;

  friend bool operator==(const NetParams& a, const NetParams& b);

 private:
  std::vector<Tensor> tensors_;
};

/// (1 - t) * a + t * b, tensor by tensor. Throws ArchMismatch.
NetParams lerp(const NetParams& a, const NetParams& b, double t);

/// MLP d -> hidden... -> 3m with leaky ReLU between layers, reshaped to m points.
struct GeneratorArch {
  std::size_t latent_dim = 96;
  std::vector<std::size_t> hidden = {256, 512};
  std::size_t points = 256;
  double slope = 0.2;

  friend bool operator==(const GeneratorArch&, const GeneratorArch&) = default;
};

/// Shared per-point MLP 3 -> point_widths, max-pool over points, then
/// head_widths -> 1. The pooled vector is the feature used for matching.
struct DiscriminatorArch {
  std::vector<std::size_t> point_widths = {64, 128};
  std::vector<std::size_t> head_widths = {64};
  double slope = 0.2;

  std::size_t feature_dim() const { return point_widths.back(); }
  friend bool operator==(const DiscriminatorArch&, const DiscriminatorArch&) = default;
};

class Generator {
 public:
  Generator(GeneratorArch arch, NetParams params);

  static NetParams init_params(const GeneratorArch& arch, Rng& rng);

  const GeneratorArch& arch() const noexcept { return arch_; }
  const NetParams& params() const noexcept { return params_; }
  NetParams& params() noexcept { return params_; }

  struct Pass {
    Tape tape;
    Tape::Id z = 0;
    Tape::Id out = 0;  // (batch * m) x 3, rows of sample b at [b*m, (b+1)*m)
    std::vector<Tape::Id> param_ids;
    std::size_t batch = 0;
  };

  /// z_batch is batch x d. Throws ShapeMismatch.
  Pass forward(const Mat& z_batch, bool grad_z, bool grad_params) const;
  PointCloud generate(const Vec& z) const;
  static PointCloud cloud_of(const Pass& pass, std::size_t sample, std::size_t points);

  struct Grads {
    Mat dz;           // batch x d (empty unless grad_z)
    NetParams dparams;  // empty unless grad_params
  };
  /// d_out is (batch * m) x 3.
  Grads backward(Pass& pass, const Mat& d_out) const;

 private:
  GeneratorArch arch_;
  NetParams params_;
};

class Discriminator {
 public:
  Discriminator(DiscriminatorArch arch, NetParams params);

  static NetParams init_params(const DiscriminatorArch& arch, Rng& rng);

  const DiscriminatorArch& arch() const noexcept { return arch_; }
  const NetParams& params() const noexcept { return params_; }
  NetParams& params() noexcept { return params_; }

  struct Pass {
    Tape tape;
    Tape::Id input = 0;    // (batch * n) x 3
    Tape::Id feature = 0;  // batch x feature_dim, the pooled layer
    Tape::Id score = 0;    // batch x 1
    std::vector<Tape::Id> param_ids;
    std::size_t batch = 0;
  };

  /// `points` is (batch * n) x 3 with equal-size consecutive clouds.
  Pass forward(const Mat& points, std::size_t batch, bool grad_input, bool grad_params) const;

  struct Grads {
    Mat dinput;
    NetParams dparams;
  };
  Grads backward(Pass& pass, Tape::Id root, const Mat& seed) const;

  /// mean_b (||d score_b / d x_b||_F - 1)^2 over a batch of equal-size
  /// clouds, and its gradient w.r.t. the parameters. Leaky ReLU and max-pool
  /// make the input gradient piecewise constant in x, so the second-order
  /// term is exact within the current activation pattern.
  struct Penalty {
    double value = 0.0;
    NetParams dparams;
    std::vector<double> grad_norms;
  };
  Penalty gradient_penalty(const Mat& points, std::size_t batch) const;

 private:
  DiscriminatorArch arch_;
  NetParams params_;
};

/// Single-cloud convenience wrappers.
struct GeneratorOutput {
  PointCloud cloud;
  Generator::Pass pass;
};
GeneratorOutput generator_forward(const Generator& g, const LatentCode& z);

struct DiscriminatorOutput {
  double score = 0.0;
  Vec feature;
  Discriminator::Pass pass;
};
DiscriminatorOutput discriminator_forward(const Discriminator& d, const PointCloud& x,
                                          bool grad_input = false);

Vec sample_latent(std::size_t dim, Rng& rng);

}  // namespace shapeinv
