#pragma once

#include <cstdint>
#include <limits>
#include <string_view>

namespace peer {

/// 64-bit FNV-1a. Stable across platforms, used for labels and fixture pinning.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Seed of the labeled sub-stream `label` under `master`.
std::uint64_t derive_seed(std::uint64_t master, std::string_view label) noexcept;

/// SplitMix64 generator. Portable bit-for-bit, unlike the std distributions,
/// so seeded sessions replay identically everywhere.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed) noexcept : state_(seed) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept;

    /// Uniform in [0, 1) with 53 bits of resolution.
    double uniform01() noexcept;

    /// True with probability p; p <= 0 never, p >= 1 always.
    bool bernoulli(double p) noexcept { return uniform01() < p; }

private:
    std::uint64_t state_;
};

} // namespace peer
