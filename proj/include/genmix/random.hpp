#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "genmix/hashing.hpp"

namespace genmix {

/// Seeded random stream with a fully specified output sequence.
///
/// std::mt19937_64's sequence is fixed by the standard, but the standard
/// distributions are not, so integer and real draws are derived here from
/// raw engine output. The same seed yields the same draws on every platform.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : engine_(seed), seed_(seed) {}

    /// Child stream keyed by this stream's seed and a purpose tag.
    RngStream derive(std::string_view tag) const { return RngStream(stable_hash(seed_, tag)); }

    std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t uniform_index(std::uint64_t n) {
        // Reject the low tail so that every residue class is equally likely.
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            std::uint64_t x = engine_();
            if (x >= threshold) return x % n;
        }
    }

    /// Uniform integer in [lo, hi], inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(uniform_index(static_cast<std::uint64_t>(hi - lo) + 1));
    }

    /// Uniform real in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

private:
    std::mt19937_64 engine_;
    std::uint64_t seed_;
};

}  // namespace genmix
