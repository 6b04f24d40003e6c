#pragma once

#include <cmath>
#include <cstdint>

namespace rsgame {

// Counter-based random numbers: every draw is a pure function of
// (seed, purpose, stream index, counter), so parallel path generation and
// common-random-number coupling across policy variants are exact by
// construction. Mixing is splitmix64 applied twice.

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace detail

/// One logical random stream. Copyable and trivially cheap; draws are
/// indexed by an explicit counter.
class RngStream {
  public:
    RngStream() = default;
    RngStream(std::uint64_t seed, std::uint64_t purpose, std::uint64_t index) {
        key_ = detail::splitmix64(detail::splitmix64(seed) ^ (purpose * 0xd1342543de82ef95ULL));
        key_ = detail::splitmix64(key_ ^ (index * 0xaf251af3b0f025b5ULL));
    }

    // random access into the canonical splitmix64 stream anchored at key_
    std::uint64_t bits(std::uint64_t counter) const {
        return detail::splitmix64(key_ + 0x9e3779b97f4a7c15ULL * counter);
    }

    /// Uniform draw in the open interval (0, 1).
    double uniform(std::uint64_t counter) const {
        return (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Two independent standard normals via Box-Muller from counters
    /// (2*pair, 2*pair+1).
    void normal_pair(std::uint64_t pair, double& z0, double& z1) const {
        const double u1 = uniform(2 * pair);
        const double u2 = uniform(2 * pair + 1);
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        z0 = r * std::cos(a);
        z1 = r * std::sin(a);
    }

    double exponential(std::uint64_t counter, double rate) const {
        return -std::log(uniform(counter)) / rate;
    }

  private:
    std::uint64_t key_ = 0;
};

/// Sequential facade over RngStream for code that consumes draws in order
/// (chain sampling).
class RngSequence {
  public:
    explicit RngSequence(RngStream stream) : stream_(stream) {}

    double uniform() { return stream_.uniform(counter_++); }
    double exponential(double rate) { return stream_.exponential(counter_++, rate); }

  private:
    RngStream stream_;
    std::uint64_t counter_ = 0;
};

// Purpose tags keep substreams of one seed independent.
namespace rng_purpose {
inline constexpr std::uint64_t chain = 1;
inline constexpr std::uint64_t brownian = 2;
inline constexpr std::uint64_t scenario = 3;
}  // namespace rng_purpose

}  // namespace rsgame
