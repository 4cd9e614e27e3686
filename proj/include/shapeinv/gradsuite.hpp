#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace shapeinv {

struct SuiteOptions {
  std::size_t configs = 50;
  std::uint64_t seed = 1;
  double tolerance = 1e-5;
  double step = 1e-6;
};

struct SuiteEntry {
  std::string name;
  std::size_t configs = 0;
  std::size_t checked = 0;  // coordinates compared, summed over configs
  std::size_t skipped = 0;  // coordinates whose perturbation crossed a kink
  double worst = 0.0;       // largest relative error seen
  bool pass = false;
};

/// Finite-difference sweep over every differentiable term: tape primitives,
/// CD-T, PatchVariance, Feature Distance, the UHD term, the composed
/// inversion loss with a frozen mask, both networks and the gradient penalty.
std::vector<SuiteEntry> run_gradient_suite(const SuiteOptions& options = {});

}  // namespace shapeinv
