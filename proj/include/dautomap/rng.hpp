#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <utility>

namespace dautomap {

/// SplitMix64 (Steele, Lea, Flood 2014): 64-bit state, state += 0x9e3779b97f4a7c15 per
/// draw, output mixed by the variant-13 finalizer. Every consumer derives its stream
/// with split(), so results are bit-reproducible from a single seed on any platform.
///
/// Conversions are fixed here rather than taken from <random> distributions, whose
/// algorithms are implementation-defined:
///   uniform()  = (next() >> 11) * 2^-53
///   below(n)   = rejection-sampled next() % n
///   normal()   = Box-Muller on two uniforms (cosine branch only)
class SplitMix64 {
public:
    static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ull;

    explicit constexpr SplitMix64(std::uint64_t seed = 0) noexcept : state_(seed) {}

    static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    constexpr std::uint64_t next() noexcept { return mix(state_ += kGamma); }

    /// Independent child stream keyed by `stream`; does not advance this generator.
    constexpr SplitMix64 split(std::uint64_t stream) const noexcept {
        return SplitMix64(mix(state_ ^ mix(stream + kGamma)));
    }

    double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n), n > 0.
    std::uint64_t below(std::uint64_t n) noexcept {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x = next();
        while (x >= limit) x = next();
        return x % n;
    }

    double normal() noexcept {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Fisher-Yates, highest index first.
    template <class T>
    void shuffle(std::span<T> items) noexcept {
        for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[below(i)]);
    }

    constexpr std::uint64_t state() const noexcept { return state_; }

private:
    std::uint64_t state_;
};

/// Stream keys used across the library.
namespace streams {
inline constexpr std::uint64_t kWeightInit = 1;
inline constexpr std::uint64_t kShuffle = 2;
inline constexpr std::uint64_t kMask = 3;
inline constexpr std::uint64_t kPhantom = 4;
inline constexpr std::uint64_t kSampleMask = 5;
}  // namespace streams

}  // namespace dautomap
