#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace shapeinv {

/// 64-bit FNV-1a.
class Fnv1a {
 public:
  void bytes(std::span<const unsigned char> data) {
    for (unsigned char c : data) {
      h_ ^= c;
      h_ *= 1099511628211ull;
    }
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h_ ^= (v >> (8 * i)) & 0xffu;
      h_ *= 1099511628211ull;
    }
  }
  void str(std::string_view s) {
    bytes({reinterpret_cast<const unsigned char*>(s.data()), s.size()});
  }
  std::uint64_t value() const noexcept { return h_; }

 private:
  std::uint64_t h_ = 1469598103934665603ull;
};

}  // namespace shapeinv
