#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "shapeinv/adam.hpp"
#include "shapeinv/nets.hpp"

namespace shapeinv {

/// Everything needed to rebuild (G, D) and to resume training.
struct Checkpoint {
  GeneratorArch generator_arch;
  DiscriminatorArch discriminator_arch;
  NetParams generator;
  NetParams discriminator;
  AdamState generator_opt;
  AdamState discriminator_opt;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  std::uint64_t epochs_done = 0;
  /// Free-form tensors carried along, e.g. an inverted latent code.
  NetParams extras;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Fresh parameters drawn from `seed`.
Checkpoint init_checkpoint(const GeneratorArch& g, const DiscriminatorArch& d, std::uint64_t seed);

Generator make_generator(const Checkpoint& c);
Discriminator make_discriminator(const Checkpoint& c);

/// Layout: "SINV", u32 version, u64 payload length, payload, u64 FNV-1a of
/// the payload. All integers and doubles little-endian; tensors row-major.
std::string encode_checkpoint(const Checkpoint& c);
/// Throws CheckpointError on bad magic, version, length, checksum or layout.
Checkpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace shapeinv
