#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>

namespace pipehmm {

// Deterministic pseudo-random generator used for every seeded operation in
// this project: xoshiro256++ with the state filled from splitmix64(seed).
//
// The standard library generators are avoided on purpose: std::mt19937_64 is
// portable but the std distributions are not, so a stream drawn through
// std::normal_distribution cannot be reproduced from another language or
// standard library. Everything here is pinned:
//   - uniform double on [0,1): (next_u64() >> 11) * 2^-53
//   - standard normal: Box-Muller cosine branch, exactly two uniforms per draw
//   - index in [0,n): floor(uniform * n)
// The identity string below is recorded in dataset metadata so an external
// reimplementation can replay any stream from its seed.
class Rng {
public:
    static constexpr const char* kIdentity =
        "xoshiro256++(splitmix64-seeded);uniform=(u64>>11)*2^-53;normal=box-muller-cos";

    explicit Rng(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& word : state_) word = splitmix64(x);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform on [0, 1) with 53-bit resolution.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Standard normal draw. Always consumes exactly two uniforms.
    double next_normal() {
        const double u1 = 1.0 - next_double();  // (0, 1], keeps log() finite
        const double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
    }

    // Uniform index in [0, n). n must be positive.
    std::size_t next_index(std::size_t n) {
        const auto i = static_cast<std::size_t>(next_double() * static_cast<double>(n));
        return i < n ? i : n - 1;
    }

private:
    static constexpr double kTwoPi = 6.283185307179586476925286766559;

    static std::uint64_t splitmix64(std::uint64_t& x) {
        std::uint64_t z = (x += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    static std::uint64_t rotl(std::uint64_t v, int k) {
        return (v << k) | (v >> (64 - k));
    }

    std::uint64_t state_[4];
};

}  // namespace pipehmm
