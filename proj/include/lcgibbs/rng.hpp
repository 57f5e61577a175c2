#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace lcgibbs {

namespace detail {
inline constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
}  // namespace detail

/**
 * Counter-based generator. The output at position n is a stateless hash of
 * (key, n), where key is derived from (seed, stream). Streams derived from
 * distinct ids are statistically independent; `split` derives child streams.
 */
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0, std::uint64_t stream = 0)
        : seed_(seed), stream_(stream),
          key_(detail::mix64(seed ^ detail::mix64(stream + 0x632be59bd9b4e019ULL))) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() { return next_u64(); }

    result_type next_u64() {
        ++counter_;
        return detail::mix64(key_ + counter_ * 0x9e3779b97f4a7c15ULL);
    }

    /// Uniform on the open interval (0, 1).
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        cached_ = r * std::sin(a);
        has_cached_ = true;
        return r * std::cos(a);
    }

    /// Unbiased integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) {
        const std::uint64_t limit = max() - max() % n;
        std::uint64_t v;
        do {
            v = next_u64();
        } while (v >= limit);
        return v % n;
    }

    /// Independent child stream, a pure function of (seed, stream, child).
    Rng split(std::uint64_t child) const {
        return Rng(seed_, detail::mix64(stream_ ^ detail::mix64(child + 0x2545f4914f6cdd1dULL)));
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }
    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

}  // namespace lcgibbs
