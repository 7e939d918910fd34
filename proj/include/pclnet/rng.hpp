#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace pclnet {

using Rng = std::mt19937_64;

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash_tag(std::string_view tag) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Seed of the substream (seed, tag, index). Stages and per-item workers draw
/// from their own substream so results do not depend on scheduling order.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag,
                                    std::uint64_t index = 0) {
  return mix64(mix64(seed ^ hash_tag(tag)) + index);
}

inline Rng substream(std::uint64_t seed, std::string_view tag,
                     std::uint64_t index = 0) {
  return Rng(derive_seed(seed, tag, index));
}

/// Unbiased draw from [0, n).
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

inline bool fair_coin(Rng& rng) { return (rng() >> 63) != 0; }

}  // namespace pclnet
