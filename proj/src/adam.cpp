#include "shapeinv/adam.hpp"

#include <cmath>
#include <string>

namespace shapeinv {

namespace {

struct Step {
  double lr, b1, b2, eps, c1, c2;

  void apply(double& x, double g, double& m, double& v) const {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g * g;
    const double mhat = m / c1;
    const double vhat = v / c2;
    x -= lr * mhat / (std::sqrt(vhat) + eps);
  }
};

Step begin_step(AdamState& state, std::size_t n, double lr, const AdamConfig& cfg) {
  if (!(lr > 0.0)) throw Error(ErrorCode::BadArgument, "Adam learning rate must be > 0");
  if (state.m.size() == 0 && state.v.size() == 0 && state.step == 0) {
    state = AdamState::like(n);
  }
  if (static_cast<std::size_t>(state.m.size()) != n || static_cast<std::size_t>(state.v.size()) != n) {
    throw Error(ErrorCode::ShapeMismatch, "Adam state holds " + std::to_string(state.m.size()) +
                                              " moments for " + std::to_string(n) + " values");
  }
  ++state.step;
  const auto t = static_cast<double>(state.step);
  return {lr, cfg.beta1, cfg.beta2, cfg.eps, 1.0 - std::pow(cfg.beta1, t),
          1.0 - std::pow(cfg.beta2, t)};
}

}  // namespace

void adam_step(std::span<double> values, std::span<const double> grads, AdamState& state,
               double lr, const AdamConfig& cfg) {
  if (values.size() != grads.size()) {
    throw Error(ErrorCode::ShapeMismatch, "Adam got " + std::to_string(grads.size()) +
                                              " gradients for " + std::to_string(values.size()) +
                                              " values");
  }
  const Step s = begin_step(state, values.size(), lr, cfg);
  for (std::size_t i = 0; i < values.size(); ++i) {
    s.apply(values[i], grads[i], state.m[static_cast<Eigen::Index>(i)],
            state.v[static_cast<Eigen::Index>(i)]);
  }
}

void adam_step(Vec& values, const Vec& grads, AdamState& state, double lr,
               const AdamConfig& cfg) {
  adam_step(std::span<double>(values.data(), static_cast<std::size_t>(values.size())),
            std::span<const double>(grads.data(), static_cast<std::size_t>(grads.size())), state,
            lr, cfg);
}

void adam_step(NetParams& params, const NetParams& grads, AdamState& state, double lr,
               const AdamConfig& cfg) {
  if (!params.same_layout(grads)) {
    throw Error(ErrorCode::ShapeMismatch, "gradient tensors do not match parameters");
  }
  const Step s = begin_step(state, params.flat_size(), lr, cfg);
  Eigen::Index off = 0;
  for (std::size_t t = 0; t < params.count(); ++t) {
    double* x = params[t].value.data();
    const double* g = grads[t].value.data();
    const Eigen::Index n = params[t].value.size();
    for (Eigen::Index i = 0; i < n; ++i) s.apply(x[i], g[i], state.m[off + i], state.v[off + i]);
    off += n;
  }
}

}  // namespace shapeinv
