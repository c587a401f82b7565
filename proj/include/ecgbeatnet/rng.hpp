#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace ecg::rng {

// splitmix64, used to spread user seeds and stream ids over the full 64-bit
// space before feeding the main generator.
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t mix_seed(uint64_t seed, uint64_t stream) {
    return splitmix64(splitmix64(seed) ^ splitmix64(stream * 0x9e3779b97f4a7c15ULL + 1));
}

// Deterministic generator. mt19937_64 output is pinned by the standard, and
// all derived draws below avoid std::uniform_*_distribution /
// std::normal_distribution, whose algorithms are implementation-defined.
// Seeded by a (seed, stream) pair so independent consumers cannot collide.
class Generator {
public:
    Generator(uint64_t seed, uint64_t stream) : engine_(mix_seed(seed, stream)) {}

    uint64_t next_u64() { return engine_(); }

    // Uniform integer in [0, bound) via Lemire's multiply-shift rejection.
    uint64_t next_below(uint64_t bound) {
        if (bound == 0) return 0;
        unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * bound;
        auto lo = static_cast<uint64_t>(m);
        if (lo < bound) {
            const uint64_t threshold = (0 - bound) % bound;
            while (lo < threshold) {
                m = static_cast<unsigned __int128>(next_u64()) * bound;
                lo = static_cast<uint64_t>(m);
            }
        }
        return static_cast<uint64_t>(m >> 64);
    }

    // Uniform double in [0, 1), 53-bit resolution.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform double in [lo, hi).
    double next_double(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Standard normal via Box-Muller; the spare value is cached.
    double next_normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - next_double(); // (0, 1]
        const double u2 = next_double();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * 3.141592653589793238462643383279502884 * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    // In-place Fisher-Yates shuffle.
    template <typename Container>
    void shuffle(Container &items) {
        const size_t n = items.size();
        for (size_t i = n; i > 1; --i) {
            const size_t j = static_cast<size_t>(next_below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace ecg::rng
