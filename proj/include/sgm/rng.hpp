#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace sgm {

/// splitmix64 finalizer; used to derive independent seed streams.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) { return mix64(a ^ mix64(b)); }
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return mix64(mix_seed(a, b) ^ mix64(c));
}

/// mt19937 wrapper with platform-stable scaling. std::uniform_real_distribution
/// is implementation-defined, so floats are built from raw 24-bit draws.
struct Rng {
    std::mt19937 gen;

    explicit Rng(std::uint64_t seed) : gen(std::uint32_t(mix64(seed) & 0xffffffffu)) {}

    std::uint32_t next_u32() { return gen(); }

    /// [0, 1)
    float unit() { return float(gen() >> 8) * 0x1p-24f; }
    double unit_d() {
        const std::uint64_t hi = gen(), lo = gen();
        return double((hi << 21) ^ lo) * 0x1p-53;
    }

    float uniform(float lo, float hi) { return lo + (hi - lo) * unit(); }

    /// Unbiased-enough index in [0, n) via fixed-point multiply.
    int below(int n) { return int((std::uint64_t(gen()) * std::uint64_t(n)) >> 32); }

    template <typename V>
    void shuffle(std::vector<V>& v) {
        for (int i = int(v.size()) - 1; i > 0; --i) {
            std::swap(v[std::size_t(i)], v[std::size_t(below(i + 1))]);
        }
    }
};

}  // namespace sgm
