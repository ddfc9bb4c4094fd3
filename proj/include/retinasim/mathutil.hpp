#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace retinasim::detail {

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// 4-point Gauss-Legendre nodes/weights on [0, 1].
struct GaussLegendre4 {
    static constexpr std::array<double, 4> nodes = {
        0.069431844202973712, 0.33000947820757187, 0.66999052179242813, 0.93056815579702629};
    static constexpr std::array<double, 4> weights = {
        0.17392742256872693, 0.32607257743127307, 0.32607257743127307, 0.17392742256872693};
};

/// Uniform deviate in [0,1) as a pure function of its key.
inline double keyed_uniform(std::uint64_t seed, std::uint64_t trial, std::int64_t a,
                            std::int64_t b) {
    std::uint64_t h = 0x243f6a8885a308d3ULL ^ seed;
    auto mix = [&h](std::uint64_t v) {
        h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        h *= 0xff51afd7ed558ccdULL;
        h ^= h >> 33;
    };
    mix(trial);
    mix(std::uint64_t(a));
    mix(std::uint64_t(b));
    mix(0x94d049bb133111ebULL);
    return double(h >> 11) * 0x1.0p-53;
}

} // namespace retinasim::detail
