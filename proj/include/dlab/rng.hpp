#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace dlab {

// Deterministic stream derivation: every consumer of randomness gets its own
// stream keyed by (master seed, purpose, index). Streams are independent of
// execution order, which is what makes parallel replicas reproducible.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ splitmix64(b));
}

inline std::uint64_t stream_key(std::uint64_t seed, std::string_view purpose,
                                std::uint64_t index = 0) {
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : purpose) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return mix(mix(seed, h), index);
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t key) { return Rng(key); }

}  // namespace dlab
