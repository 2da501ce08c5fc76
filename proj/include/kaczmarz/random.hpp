#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string_view>

namespace kz {

// Names recorded in dataset sidecars and benchmark metadata so that streams
// can be reproduced by other implementations.
inline constexpr std::string_view kPrngName = "xoshiro256**(splitmix64-seeded)";
inline constexpr std::string_view kNormalAlgorithm = "marsaglia-polar";

/// One step of SplitMix64; advances `state` and returns the mixed output.
constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Per-run seed derived from a campaign seed: master XOR run index. The
/// generator re-mixes it through SplitMix64, so neighbouring indices give
/// unrelated streams.
constexpr std::uint64_t run_seed(std::uint64_t master, std::uint64_t run_index) noexcept {
    return master ^ run_index;
}

/// xoshiro256** (Blackman & Vigna). Satisfies UniformRandomBitGenerator.
class Xoshiro256 {
public:
    using result_type = std::uint64_t;

    explicit Xoshiro256(std::uint64_t seed) noexcept {
        std::uint64_t sm = seed;
        for (auto& s : s_) s = splitmix64(sm);
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1) from the top 53 bits.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    /// floor(u * n) for uniform u in [0,1), clamped to n - 1.
    std::size_t index(std::size_t n) noexcept {
        const auto i = static_cast<std::size_t>(uniform() * static_cast<double>(n));
        return i < n ? i : n - 1;
    }

    friend bool operator==(const Xoshiro256&, const Xoshiro256&) = default;

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
        return (x << k) | (x >> (64 - k));
    }

    std::array<std::uint64_t, 4> s_{};
};

/// Normal variates by the Marsaglia polar method. Keeps the second variate
/// of each accepted pair.
class NormalSampler {
public:
    double operator()(Xoshiro256& rng, double mean = 0.0, double stddev = 1.0);

    void reset() noexcept { spare_.reset(); }

private:
    std::optional<double> spare_;
};

/// In-place Fisher-Yates shuffle driven by Xoshiro256::index, so the result
/// does not depend on the standard library's distribution implementations.
void fisher_yates_shuffle(std::span<std::size_t> values, Xoshiro256& rng);

}  // namespace kz
