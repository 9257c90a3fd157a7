#pragma once

// Counter-based Gaussian draws: Philox4x32-10 keyed by the master seed, with
// the counter laid out as (path, step, component-block).  A draw is a pure
// function of (seed, path, step, component), so enlarging the path count or
// re-running a slice regenerates bit-identical numbers.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace bsdelab {

namespace detail {

struct philox_state {
    uint32_t c[4];
    uint32_t k[2];
};

inline void philox_round(philox_state& s) {
    constexpr uint64_t M0 = 0xD2511F53, M1 = 0xCD9E8D57;
    const uint64_t p0 = M0 * s.c[0];
    const uint64_t p1 = M1 * s.c[2];
    const uint32_t hi0 = static_cast<uint32_t>(p0 >> 32),
                   lo0 = static_cast<uint32_t>(p0);
    const uint32_t hi1 = static_cast<uint32_t>(p1 >> 32),
                   lo1 = static_cast<uint32_t>(p1);
    const uint32_t c1 = s.c[1], c3 = s.c[3];
    s.c[0] = hi1 ^ c1 ^ s.k[0];
    s.c[1] = lo1;
    s.c[2] = hi0 ^ c3 ^ s.k[1];
    s.c[3] = lo0;
    s.k[0] += 0x9E3779B9;
    s.k[1] += 0xBB67AE85;
}

inline void philox10(philox_state& s) {
    for (int r = 0; r < 10; ++r) philox_round(s);
}

// uint64 -> double in (0,1); offset keeps log() away from 0.
inline double to_unit(uint64_t v) {
    return (static_cast<double>(v >> 11) + 0.5) * 0x1.0p-53;
}

} // namespace detail

// One standard normal per (seed, path, step, component) via Box-Muller on a
// single Philox block.
inline double gaussian_draw(uint64_t seed, uint64_t path, uint32_t step,
                            uint32_t component) {
    detail::philox_state s;
    s.c[0] = static_cast<uint32_t>(path);
    s.c[1] = static_cast<uint32_t>(path >> 32);
    s.c[2] = step;
    s.c[3] = component;
    s.k[0] = static_cast<uint32_t>(seed);
    s.k[1] = static_cast<uint32_t>(seed >> 32);
    detail::philox10(s);
    const uint64_t a = (static_cast<uint64_t>(s.c[0]) << 32) | s.c[1];
    const uint64_t b = (static_cast<uint64_t>(s.c[2]) << 32) | s.c[3];
    const double u1 = detail::to_unit(a);
    const double u2 = detail::to_unit(b);
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
}

} // namespace bsdelab
