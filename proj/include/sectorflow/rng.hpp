#pragma once

#include <cstdint>

namespace sectorflow::rng {

// splitmix64 step; good enough to decorrelate derived seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Derive an independent stream seed from a base seed and a stream index.
// Used so per-track / per-member / per-restart RNG does not depend on
// scheduling order (serial and parallel runs draw identical numbers).
inline std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t s = seed ^ (0x9E3779B97F4A7C15ull * (stream + 1));
    return splitmix64(s);
}

inline std::uint64_t mix(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    return mix(mix(seed, a), b);
}

}  // namespace sectorflow::rng
