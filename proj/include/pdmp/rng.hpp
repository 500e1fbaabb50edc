#pragma once

// Random streams. Every trajectory draws from its own mt19937_64 whose seed
// is derived from (user seed, replicate index) by a splitmix64 hash, so
// replicate r produces the same numbers no matter how replicates are
// scheduled across threads.

#include <cmath>
#include <cstdint>
#include <random>

namespace pdmp {

inline constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Seed of the stream used by replicate `replicate` of a run seeded `seed`.
inline constexpr std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t replicate) noexcept {
    return splitmix64(splitmix64(seed) ^ splitmix64(replicate + 0x632be59bd9b4e019ULL));
}

class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t replicate = 0)
        : engine_(stream_seed(seed, replicate)) {}

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    /// Exponential with the given rate (mean 1/rate).
    double exponential(double rate) noexcept { return -std::log1p(-uniform()) / rate; }

    double normal() { return normal_(engine_); }

    std::uint64_t next() noexcept { return engine_(); }

    std::mt19937_64& engine() noexcept { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace pdmp
