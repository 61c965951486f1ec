#pragma once

#include <cmath>
#include <cstdint>

#include "ffpkit/common.hpp"

namespace ffpkit {

// Counter-free splitmix64, used to derive independent stream seeds.
inline uint64_t splitmix64(uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// xoshiro256** with hand-rolled uniform/normal draws so streams are
// bit-stable across compilers and standard libraries.
class Rng {
public:
    explicit Rng(uint64_t seed) {
        uint64_t sm = seed;
        for (auto& word : s_) {
            word = splitmix64(sm);
        }
        has_spare_ = false;
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0,1) with 53-bit resolution.
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in (0,1), endpoints excluded.
    double uniform_open() {
        double u;
        do {
            u = uniform();
        } while (u == 0.0);
        return u;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Integer in [0, n).
    uint64_t next_below(uint64_t n) {
        check_arg(n > 0, "next_below: n must be positive");
        // Rejection sampling keeps the draw unbiased.
        const uint64_t limit = ~uint64_t(0) - (~uint64_t(0) % n);
        uint64_t v;
        do {
            v = next_u64();
        } while (v >= limit);
        return v % n;
    }

    int64_t range(int64_t lo, int64_t hi_inclusive) {
        check_arg(hi_inclusive >= lo, "range: empty interval");
        return lo + int64_t(next_below(uint64_t(hi_inclusive - lo + 1)));
    }

    // Box-Muller; spares one draw out of each pair.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform_open();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    // Derives an independent child stream; stable under call order.
    Rng child(uint64_t tag) const {
        uint64_t sm = s_[0] ^ rotl(s_[3], 13) ^ (tag * 0x9e3779b97f4a7c15ULL);
        return Rng(splitmix64(sm));
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    uint64_t s_[4];
    double spare_ = 0.0;
    bool has_spare_;
};

// Purpose tags for per-purpose seeded streams.
namespace stream_tag {
constexpr uint64_t params = 1;
constexpr uint64_t data = 2;
constexpr uint64_t noise = 3;
constexpr uint64_t timestep = 4;
constexpr uint64_t probe = 5;
constexpr uint64_t codec = 6;
}  // namespace stream_tag

inline Rng stream_for(uint64_t seed, uint64_t tag) {
    uint64_t sm = seed;
    uint64_t base = splitmix64(sm);
    Rng root(base);
    return root.child(tag);
}

}  // namespace ffpkit
