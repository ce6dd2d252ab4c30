#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace dip {

/// All randomized operations draw from std::mt19937_64. The engine's output
/// sequence is pinned by the C++ standard, so runs with the same seed agree
/// across compilers and platforms. Floating-point draws and categorical
/// sampling below avoid std::*_distribution on purpose: those are
/// implementation-defined, the helpers here are not.
using Rng = std::mt19937_64;

/// Uniform double in [0, 1): top 53 bits of one engine output.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// 64-bit FNV-1a over a byte string.
inline uint64_t fnv1a64(std::string_view bytes) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

/// splitmix64 finalizer; used to decorrelate derived seeds.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from (base seed, tag). Per-instance
/// pipeline runs use tag = instance id, so targets can be processed in any
/// order (or in parallel) without changing any output.
inline uint64_t derive_seed(uint64_t base, std::string_view tag) {
  return splitmix64(base ^ fnv1a64(tag));
}

}  // namespace dip
