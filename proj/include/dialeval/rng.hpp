#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace dialeval {

inline constexpr uint64_t kFnvOffset = 1469598103934665603ull;
inline constexpr uint64_t kFnvPrime = 1099511628211ull;

inline uint64_t fnv1a64(std::string_view text, uint64_t h = kFnvOffset) {
    for (const char c : text) {
        h ^= static_cast<unsigned char>(c);
        h *= kFnvPrime;
    }
    return h;
}

inline uint64_t fnv1a64_u64(uint64_t value, uint64_t h = kFnvOffset) {
    for (int i = 0; i < 8; ++i) {
        h ^= (value >> (8 * i)) & 0xffu;
        h *= kFnvPrime;
    }
    return h;
}

/// Child seed for an independent substream, e.g. per sampled trajectory or
/// per dialogue. mt19937_64 itself is fully specified by the standard, so
/// streams are reproducible across platforms.
inline uint64_t substream_seed(uint64_t seed, uint64_t index) {
    return fnv1a64_u64(index, fnv1a64_u64(seed));
}

/// Uniform draw from [0, n). Hand-rolled (rejection sampling) because the
/// standard distributions are implementation-defined and would break
/// cross-toolchain reproducibility.
inline uint64_t draw_index(std::mt19937_64& rng, uint64_t n) {
    if (n == 0) return 0;
    const uint64_t bound = ~uint64_t{0} - (~uint64_t{0} % n);
    uint64_t r = rng();
    while (r >= bound) r = rng();
    return r % n;
}

/// Uniform int in [lo, hi] inclusive.
inline int draw_int(std::mt19937_64& rng, int lo, int hi) {
    if (hi <= lo) return lo;
    return lo + static_cast<int>(draw_index(rng, static_cast<uint64_t>(hi - lo) + 1));
}

/// Uniform real in [0, 1) with 53 random bits.
inline double draw_unit(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace dialeval
