#pragma once

#include <array>
#include <cstdint>

namespace fdms {

// splitmix64: used to expand a single seed into independent stream seeds and
// to initialize xoshiro state. Reference constants from Vigna's public domain
// implementation.
inline uint64_t splitmix64_next(uint64_t& state) {
    state += 0x9E3779B97f4A7C15ULL;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Derive the seed for sub-stream `index` of a master seed. Stable contract:
// corpora regenerate bit-identically from (master_seed, scene index) alone.
inline uint64_t derive_stream_seed(uint64_t master_seed, uint64_t index) {
    uint64_t st = master_seed + index * 0x9E3779B97f4A7C15ULL;
    return splitmix64_next(st);
}

// xoshiro256++ PRNG. Deterministic across platforms; all randomness in the
// project flows through this generator.
class Rng {
public:
    explicit Rng(uint64_t seed) {
        uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64_next(sm);
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0, 1): top 53 bits, exact dyadic rational.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    // Unbiased integer in [0, n). n must be > 0.
    uint64_t below(uint64_t n) {
        const uint64_t limit = ~uint64_t{0} - (~uint64_t{0} % n);
        uint64_t v;
        do {
            v = next_u64();
        } while (v >= limit);
        return v % n;
    }

    // Approximate standard normal: sum of 12 uniforms minus 6 (Irwin-Hall).
    // Bounded to [-6, 6]; avoids transcendental calls in the sample path.
    double gaussian() {
        double acc = 0.0;
        for (int i = 0; i < 12; ++i) acc += uniform();
        return acc - 6.0;
    }

private:
    static uint64_t rotl(uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }
    std::array<uint64_t, 4> s_{};
};

} // namespace fdms
