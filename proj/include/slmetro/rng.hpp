#pragma once

#include <cmath>
#include <cstdint>

namespace slmetro {

// Counter-based random stream: every draw is a pure function of
// (seed, stream, counter), so parallel consumers get identical values
// regardless of execution order.

inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline uint64_t hash_counter(uint64_t seed, uint64_t stream, uint64_t counter) {
    return mix64(mix64(mix64(seed) ^ stream) ^ counter);
}

// Uniform in (0, 1]; never returns 0 so it is safe under log().
inline double u01(uint64_t h) {
    return (static_cast<double>(h >> 11) + 1.0) * 0x1.0p-53;
}

inline double uniform(uint64_t seed, uint64_t stream, uint64_t counter) {
    return u01(hash_counter(seed, stream, counter));
}

// Standard normal via Box-Muller on two decorrelated hashes.
inline double gaussian(uint64_t seed, uint64_t stream, uint64_t counter) {
    double u1 = u01(hash_counter(seed, stream, counter * 2));
    double u2 = u01(hash_counter(seed, stream, counter * 2 + 1));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

} // namespace slmetro
