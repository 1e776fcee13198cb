#pragma once

#include <cstdint>
#include <random>

namespace qdmeta {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derives an independent child seed from a run seed and up to two stream ids.
/// Used to give each meta-individual its own stream so that sequential and
/// per-individual-parallel execution produce identical results.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    return splitmix64(splitmix64(splitmix64(seed) ^ a) ^ b);
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

} // namespace qdmeta
