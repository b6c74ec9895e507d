#pragma once

// Seeded randomness with a portable draw layer. The standard distributions are
// implementation-defined, so every draw the library makes goes through the
// helpers below; byte-identical output across standard libraries depends on it.

#include <cmath>
#include <cstdint>
#include <random>

namespace evoi {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Stream `tag` of the generator family rooted at `seed`.
inline Rng make_stream(std::uint64_t seed, std::uint64_t tag) {
    return Rng{mix_seed(mix_seed(seed) ^ mix_seed(tag + 0x632BE59BD9B4E019ull))};
}

/// Uniform in [0, 1) with 53 bits of resolution.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

inline bool bernoulli(Rng& rng, double p) {
    return uniform01(rng) < p;
}

/// Uniform integer in [0, n). Rejection sampling keeps it unbiased.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x = rng();
    while (x >= limit) x = rng();
    return x % n;
}

}  // namespace evoi
