#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "shapeinv/nets.hpp"

namespace shapeinv {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moments for one flat parameter block plus the step count.
struct AdamState {
  std::uint64_t step = 0;
  Vec m;
  Vec v;

  static AdamState like(std::size_t n) { return {0, Vec::Zero(static_cast<Eigen::Index>(n)), Vec::Zero(static_cast<Eigen::Index>(n))}; }
  friend bool operator==(const AdamState& a, const AdamState& b) {
    return a.step == b.step && a.m == b.m && a.v == b.v;
  }
};

/// One bias-corrected Adam update in place:
///   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2,
///   x <- x - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps).
/// Throws ShapeMismatch / BadArgument.
void adam_step(std::span<double> values, std::span<const double> grads, AdamState& state,
               double lr, const AdamConfig& cfg = {});

void adam_step(Vec& values, const Vec& grads, AdamState& state, double lr,
               const AdamConfig& cfg = {});

/// Updates every tensor of `params` as one flat block.
void adam_step(NetParams& params, const NetParams& grads, AdamState& state, double lr,
               const AdamConfig& cfg = {});

}  // namespace shapeinv
