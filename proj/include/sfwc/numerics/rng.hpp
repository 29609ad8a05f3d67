#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace sfwc {

enum class RngPurpose : std::uint64_t { Init = 1, Shuffle = 2, Data = 3, Noise = 4 };

std::string_view purpose_name(RngPurpose purpose) noexcept;

/// Counter-based generator: value i of a stream is a keyed SplitMix64 hash of
/// (seed, purpose, substream, i). Identical keys give identical sequences on
/// every platform; no hidden state beyond the counter.
class RngStream {
public:
    RngStream(std::uint64_t seed, RngPurpose purpose, std::uint64_t substream = 0) noexcept;

    std::uint64_t seed() const noexcept { return seed_; }
    RngPurpose purpose() const noexcept { return purpose_; }

    /// Independent child stream, e.g. one per epoch or per layer.
    RngStream substream(std::uint64_t index) const noexcept;

    std::uint64_t next_u64() noexcept;
    /// Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept;
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n), unbiased.
    std::uint64_t index(std::uint64_t n) noexcept;
    /// Standard normal via Box-Muller (the second variate is cached).
    double normal() noexcept;

    std::vector<std::size_t> permutation(std::size_t n) noexcept;

private:
    std::uint64_t seed_;
    RngPurpose purpose_;
    std::uint64_t substream_;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace sfwc
