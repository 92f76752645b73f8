#pragma once

#include <cstdint>
#include <random>

namespace twz {

// splitmix64; used only for seed derivation, never as the sampling generator.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Seed-splitting rule: every independent work item i under a master seed m
// samples from mt19937_64 seeded with derive_seed(m, i). Results are then
// order-independent and identical for any worker count.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(splitmix64(master) ^ splitmix64(index + 0x6A09E667F3BCC909ULL));
}

using Rng = std::mt19937_64;

}  // namespace twz
