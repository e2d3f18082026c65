#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace gswan {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Stable sub-seed from (seed, purpose[, index]); all randomness in the
// project flows from one master seed through this function.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose) {
    std::uint64_t h = seed ^ 0x243f6a8885a308d3ULL;
    for (unsigned char c : purpose) {
        h ^= c;
        splitmix64(h);
    }
    return splitmix64(h);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose, std::uint64_t index) {
    std::uint64_t h = derive_seed(seed, purpose) ^ (index * 0x9e3779b97f4a7c15ULL);
    return splitmix64(h);
}

// Deterministic generator with fixed-algorithm draws so results do not
// depend on the standard library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed ^ 0x6a09e667f3bcc908ULL) {
        // warm up so nearby seeds decorrelate
        splitmix64(state_);
        splitmix64(state_);
    }

    std::uint64_t next_u64() { return splitmix64(state_); }

    // uniform in [0, 1)
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform in [lo, hi)
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // uniform integer in [0, n), n >= 1; rejection sampling, no modulo bias
    std::uint64_t uniform_int(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    // standard normal via Box-Muller
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = uniform01();
        double u2 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.141592653589793238462643383279502884 * u2;
        cached_ = r * std::sin(theta);
        has_cached_ = true;
        return r * std::cos(theta);
    }

private:
    std::uint64_t state_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

}  // namespace gswan
