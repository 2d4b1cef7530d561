#pragma once

// Deterministic random numbers. The generators behind std::*_distribution
// are implementation-defined, so uniform/normal are derived from raw bits
// here; identical seeds give identical streams on every platform.

#include <cmath>
#include <cstdint>
#include <random>

namespace hsse {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t bits() { return eng_(); }

    // Uniform in [0, 1) with 53 bits of mantissa.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; one value per call, no caching.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Uniform integer in [0, n).
    std::uint64_t index(std::uint64_t n) { return n == 0 ? 0 : eng_() % n; }

    // Independent substream for (seed, stream-id) pairs; used so that e.g.
    // epoch e / element i draws never alias across loop restructurings.
    static Rng fork(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
        // splitmix64 over the mixed key
        std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (a + 1) + 0xbf58476d1ce4e5b9ULL * (b + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return Rng(z ^ (z >> 31));
    }

private:
    std::mt19937_64 eng_;
};

}  // namespace hsse
