#ifndef SEQLAB_RNG_HPP
#define SEQLAB_RNG_HPP

#include <cstdint>
#include <random>

// Portable sampling on top of std::mt19937_64. The standard distributions are
// implementation-defined, so draws are done by hand to keep outputs identical
// across toolchains.
namespace seqlab::rng {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Seed for an independent sub-stream (per draw, per session, ...).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
}

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t seed, std::uint64_t stream) {
    return Engine(derive_seed(seed, stream));
}

/// Uniform integer in [0, n); n must be > 0.
inline std::uint64_t bounded(Engine& engine, std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = engine();
    } while (x >= limit);
    return x % n;
}

/// Uniform double in [0, 1) with 53 random bits.
inline double unit(Engine& engine) {
    return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

}  // namespace seqlab::rng

#endif  // SEQLAB_RNG_HPP
