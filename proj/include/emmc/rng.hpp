#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace emmc {

using Rng = std::mt19937_64;

// Stateless 64-bit mixer (Steele et al., splitmix64). Used to derive
// independent stream seeds from one master seed.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// seed = master mixed with a path of integers (replicate, node, stage, ...).
// The same path always yields the same seed; distinct paths decorrelate.
inline uint64_t derive_seed(uint64_t master, std::initializer_list<uint64_t> path) {
  uint64_t h = splitmix64(master);
  for (uint64_t p : path) {
    h = splitmix64(h ^ splitmix64(p + 0x9E3779B97F4A7C15ULL));
  }
  return h;
}

}  // namespace emmc
