#pragma once

#include <cstdint>
#include <random>

namespace dsa {

// Seed splitting: every random stream in the library is keyed by
// (seed, stream, substream) and mixed with splitmix64, so results do not
// depend on the order or the number of workers that consume the streams.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream = 0) {
  return splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ (substream * 0xD1B54A32D192ED03ULL));
}

using Rng = std::mt19937_64;

inline Rng make_stream(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream = 0) {
  return Rng(derive_seed(seed, stream, substream));
}

}  // namespace dsa
