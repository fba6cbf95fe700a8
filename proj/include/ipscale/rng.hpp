#pragma once

#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

namespace ipscale {

/**
 * SplitMix64 used as a counter-based generator: the k-th output is a fixed
 * bijective mix of (seed + k * golden_gamma). The algorithm is fully specified
 * here, so streams are identical on every platform. Satisfies
 * UniformRandomBitGenerator, so Boost.Random distributions can draw from it.
 */
class SplitMix64 {
public:
    using result_type = std::uint64_t;

    explicit SplitMix64(std::uint64_t seed = 0, std::uint64_t stream = 0) noexcept
        : key_(mix(seed ^ mix(stream + 0x632BE59BD9B4E019ULL))) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept { return mix(key_ + (++counter_) * kGamma); }

    /// Output at an absolute counter position; does not advance the stream.
    result_type at(std::uint64_t counter) const noexcept { return mix(key_ + counter * kGamma); }

    std::uint64_t counter() const noexcept { return counter_; }

    /// Uniform integer in [0, bound) by rejection (no modulo bias).
    std::uint64_t below(std::uint64_t bound) noexcept
    {
        const std::uint64_t limit = max() - max() % bound;
        std::uint64_t x;
        do {
            x = (*this)();
        } while (x >= limit);
        return x % bound;
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

private:
    static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

    static constexpr std::uint64_t mix(std::uint64_t z) noexcept
    {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

/// Fisher-Yates shuffle of 0..n-1.
inline std::vector<long> random_permutation(long n, SplitMix64& rng)
{
    std::vector<long> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0L);
    for (long i = n - 1; i > 0; --i) {
        const auto k = static_cast<long>(rng.below(static_cast<std::uint64_t>(i) + 1));
        std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(k)]);
    }
    return perm;
}

} // namespace ipscale
