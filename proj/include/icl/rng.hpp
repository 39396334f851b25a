#pragma once

#include <cstdint>
#include <random>

namespace icl {

/// splitmix64 finalizer; decorrelates nearby seeds.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Deterministic per-index sub-seed so batch element i is independent of
/// every other element and of iteration order.
inline std::uint64_t derive_subseed(std::uint64_t seed, std::uint64_t index) {
    return mix64(mix64(seed) ^ mix64(index + 1));
}

inline std::mt19937_64 make_engine(std::uint64_t seed) {
    return std::mt19937_64(mix64(seed));
}

} // namespace icl
