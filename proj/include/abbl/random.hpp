#pragma once

#include <cstdint>
#include <limits>

namespace abbl {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/*!
 * Counter-based splittable random stream.
 *
 * A stream is a (key, counter) pair; the n-th draw is mix64(key + n * gamma).
 * Child streams are derived from the parent key and a child index only, so
 * stream (seed, i, j) is the same no matter which thread creates it or in
 * which order children are requested.
 */
class RandomStream {
  public:
    using result_type = std::uint64_t;

    explicit constexpr RandomStream(std::uint64_t seed) noexcept : key_(mix64(seed + kGamma)) {}

    // Independent child stream for the given index.
    constexpr RandomStream split(std::uint64_t index) const noexcept
    {
        RandomStream child(0);
        child.key_ = mix64(key_ ^ mix64((index + 1) * 0xd1b54a32d192ed03ull));
        return child;
    }

    constexpr std::uint64_t next() noexcept { return mix64(key_ + (++counter_) * kGamma); }

    // Uniform double in [0, 1) with 53 random bits.
    constexpr double uniform() noexcept
    {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    constexpr double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). Lemire's multiply-shift with rejection.
    std::uint64_t below(std::uint64_t n) noexcept
    {
        if (n <= 1)
            return 0;
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const unsigned __int128 m = static_cast<unsigned __int128>(next()) * n;
            if (static_cast<std::uint64_t>(m) >= threshold)
                return static_cast<std::uint64_t>(m >> 64);
        }
    }

    constexpr std::uint64_t draws() const noexcept { return counter_; }

    // UniformRandomBitGenerator
    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }
    constexpr result_type operator()() noexcept { return next(); }

  private:
    static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ull;

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

} // namespace abbl
