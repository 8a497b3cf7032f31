#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace quesco {

// Counter-based splittable RNG (splitmix64 core). Streams derived from
// (seed, label) are independent and byte-stable across platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform integer in [0, n), n > 0
    std::uint64_t next_below(std::uint64_t n) {
        // rejection sampling to avoid modulo bias
        const std::uint64_t limit = ~0ULL - (~0ULL % n);
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    // uniform double in [0, 1)
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform double in [lo, hi)
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    bool bernoulli(double p) { return next_double() < p; }

    // standard normal via Box-Muller
    double normal() {
        double u1 = next_double();
        double u2 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    // child stream keyed by a string label
    Rng split(std::string_view label) const {
        std::uint64_t h = state_ ^ 0xcbf29ce484222325ULL;
        for (char c : label) {
            h ^= static_cast<std::uint8_t>(c);
            h *= 0x100000001b3ULL;
        }
        return Rng(h);
    }

    Rng split(std::uint64_t key) const { return Rng(state_ ^ (key * 0xff51afd7ed558ccdULL + 1)); }

    std::uint64_t state() const { return state_; }
    static Rng from_state(std::uint64_t s) {
        Rng r(0);
        r.state_ = s;
        return r;
    }

private:
    std::uint64_t state_;
};

}  // namespace quesco
