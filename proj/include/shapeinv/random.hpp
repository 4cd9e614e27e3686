#pragma once

#include <cstdint>
#include <random>

namespace shapeinv {

using Rng = std::mt19937_64;

/// Independent stream for (seed, stream id), so per-sample and per-epoch
/// draws do not depend on how many values earlier streams consumed.
inline Rng derive_rng(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t x = seed ^ (stream * 0x9e3779b97f4a7c15ULL);
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return Rng(x);
}

}  // namespace shapeinv
