#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace mpath {

using Rng = std::mt19937_64;

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Counter-based stream seed: seed = hash(run_seed, realization, n, j, ...).
constexpr std::uint64_t stream_seed(std::initializer_list<std::uint64_t> keys) {
    std::uint64_t h = 0x6a09e667f3bcc909ULL;
    for (auto k : keys) h = mix64(h ^ mix64(k));
    return h;
}

inline double uniform01(Rng& rng) {
    // (0,1): never returns exactly 0
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

inline double std_normal(Rng& rng) {
    return std::normal_distribution<double>{}(rng);
}

}  // namespace mpath
