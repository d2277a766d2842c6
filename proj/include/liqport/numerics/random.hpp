#pragma once

#include <cstdint>

namespace liqport::numerics {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of substream `id` under a master seed; streams for distinct ids are
/// decorrelated and independent of the order in which they are requested.
constexpr std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t id) {
  return splitmix64(splitmix64(seed) ^ splitmix64(id + 0x632BE59BD9B4E019ULL));
}

}  // namespace liqport::numerics
