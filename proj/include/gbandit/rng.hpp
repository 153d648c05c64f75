#pragma once

#include <cstdint>
#include <limits>

namespace gbandit {

// SplitMix64 finalizer. Bijective on 64-bit words, good avalanche.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) noexcept {
    return mix64(h ^ mix64(v));
}

// Top 53 bits mapped to [0, 1).
constexpr double to_unit(std::uint64_t x) noexcept {
    return static_cast<double>(x >> 11) * 0x1.0p-53;
}

/// Small counter-based engine satisfying UniformRandomBitGenerator.
/// Copies are independent and replay the same sequence.
class SplitMix64 {
public:
    using result_type = std::uint64_t;

    explicit constexpr SplitMix64(std::uint64_t seed = 0) noexcept : state_(seed) {}

    constexpr result_type operator()() noexcept { return mix64(state_++); }
    constexpr double uniform() noexcept { return to_unit((*this)()); }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    friend constexpr bool operator==(const SplitMix64&, const SplitMix64&) = default;

private:
    std::uint64_t state_;
};

// Stream tags separate the reward PRF from other per-run randomness.
inline constexpr std::uint64_t kRewardTag = 0x7265776172645F31ULL;
inline constexpr std::uint64_t kGossipTag = 0x676F737369705F31ULL;

inline SplitMix64 make_run_engine(std::uint64_t master_seed, std::uint64_t run, std::uint64_t tag) noexcept {
    return SplitMix64(hash_combine(hash_combine(mix64(master_seed), tag), run));
}

}  // namespace gbandit
