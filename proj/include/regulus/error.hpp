#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace regulus {

/// Raised for every contract violation surfaced to callers: malformed input
/// files, invalid parameters, inconsistent hierarchies.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

// 64-bit FNV-1a. Stable across platforms, used for content and parameter hashes.
inline std::uint64_t fnv1a(std::string_view bytes,
                           std::uint64_t seed = 14695981039346656037ull) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

}  // namespace detail
}  // namespace regulus
