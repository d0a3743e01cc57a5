#pragma once

#include <cmath>
#include <cstdint>

namespace maxcorr::rng {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;

inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Counter-based generator: every draw is a pure function of
// (seed, stream, counter). Chunked or multi-threaded consumers see the
// exact same stream regardless of evaluation order or worker count.
inline std::uint64_t bits_at(std::uint64_t seed, std::uint64_t stream,
                             std::uint64_t counter) {
    std::uint64_t z = seed + kGolden * counter
                      + 0xd1b54a32d192ed03ull * (stream + 1);
    return mix64(mix64(z) ^ counter);
}

// Uniform on [0, 1), 53-bit resolution.
inline double uniform(std::uint64_t seed, std::uint64_t stream,
                      std::uint64_t counter) {
    return static_cast<double>(bits_at(seed, stream, counter) >> 11)
           * 0x1.0p-53;
}

// Standard normal via Box-Muller. A draw with index `counter` consumes the
// uniforms at counters 2*counter and 2*counter + 1.
inline double standard_normal(std::uint64_t seed, std::uint64_t stream,
                              std::uint64_t counter) {
    // (0, 1] so the log never sees zero.
    double u1 = static_cast<double>(
                    (bits_at(seed, stream, 2 * counter) >> 11) + 1)
                * 0x1.0p-53;
    double u2 = uniform(seed, stream, 2 * counter + 1);
    constexpr double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

// Uniform integer in [0, bound) without modulo bias worth worrying about
// at the bounds used here (bound << 2^32).
inline std::uint64_t uniform_index(std::uint64_t seed, std::uint64_t stream,
                                   std::uint64_t counter, std::uint64_t bound) {
    return bits_at(seed, stream, counter) % bound;
}

}  // namespace maxcorr::rng
