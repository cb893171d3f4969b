#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace vqg {

using Rng = std::mt19937_64;

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes,
                    std::uint64_t basis = 0xcbf29ce484222325ULL) noexcept;

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Seed derivation used everywhere a component needs its own stream:
///   derive_seed(m, name, i) = splitmix64(splitmix64(m ^ fnv1a(name)) + i)
/// Streams keyed by different names or indices are decorrelated; the same
/// triple always yields the same seed.
std::uint64_t derive_seed(std::uint64_t master, std::string_view component,
                          std::uint64_t index = 0) noexcept;

inline Rng make_rng(std::uint64_t master, std::string_view component,
                    std::uint64_t index = 0) {
  return Rng(derive_seed(master, component, index));
}

/// Uniform double in [0, 1) from the top 53 bits of one draw.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n) without modulo bias.
std::uint64_t uniform_index(Rng& rng, std::uint64_t n);

}  // namespace vqg
