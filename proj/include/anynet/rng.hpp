#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace anynet {

// All randomness in the library flows from a single 64-bit seed through
// named substreams, so that changing the sample count of one module does
// not perturb the draws of another.
inline std::uint64_t hash_name(std::string_view name) {
    std::uint64_t h = 14695981039346656037ull;  // FNV-1a
    for (unsigned char c : name) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::mt19937_64 substream(std::uint64_t seed, std::string_view name) {
    std::uint64_t h = hash_name(name);
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
    return std::mt19937_64(seq);
}

// Uniform double in [0, 1) with 53 random bits. Hand-rolled instead of
// std::uniform_real_distribution so that streams are identical across
// standard library implementations.
inline double uniform01(std::mt19937_64& g) {
    return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

inline double uniform_real(std::mt19937_64& g, double lo, double hi) {
    return lo + (hi - lo) * uniform01(g);
}

// Uniform integer in [0, n), rejection-sampled to avoid modulo bias.
inline std::uint64_t uniform_index(std::mt19937_64& g, std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - (std::numeric_limits<std::uint64_t>::max() % n);
    std::uint64_t v = g();
    while (v >= limit) v = g();
    return v % n;
}

inline bool bernoulli(std::mt19937_64& g, double p) {
    return uniform01(g) < p;
}

// Box-Muller; consumes exactly two draws per call.
inline double normal(std::mt19937_64& g, double mean = 0.0, double stddev = 1.0) {
    double u1 = 1.0 - uniform01(g);  // (0, 1]
    double u2 = uniform01(g);
    double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(6.283185307179586476925286766559 * u2);
}

}  // namespace anynet
