#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace lastmile {

using Rng = std::mt19937_64;

/// Independent stream derived from a scenario seed and a stable label
/// ("gps", "vo", "depth", ...). Same (seed, label) always yields the same stream.
inline Rng make_stream(std::uint64_t seed, std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  // splitmix64 finalizer over the combined value
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (h | 1ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  z ^= z >> 31;
  return Rng(z);
}

/// Standard normal draw via Box-Muller on the raw engine output, so streams
/// are reproducible across standard library implementations.
inline double standard_normal(Rng& rng) {
  constexpr double kScale = 1.0 / 9007199254740992.0;  // 2^-53
  const double u1 = (static_cast<double>(rng() >> 11) + 1.0) * kScale;
  const double u2 = static_cast<double>(rng() >> 11) * kScale;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

inline double uniform(Rng& rng, double lo, double hi) {
  constexpr double kScale = 1.0 / 9007199254740992.0;
  return lo + (hi - lo) * static_cast<double>(rng() >> 11) * kScale;
}

}  // namespace lastmile
