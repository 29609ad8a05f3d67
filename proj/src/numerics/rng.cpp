#include "sfwc/numerics/rng.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

namespace sfwc {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

} // namespace

std::string_view purpose_name(RngPurpose purpose) noexcept {
    switch (purpose) {
    case RngPurpose::Init: return "init";
    case RngPurpose::Shuffle: return "shuffle";
    case RngPurpose::Data: return "data";
    case RngPurpose::Noise: return "noise";
    }
    return "unknown";
}

RngStream::RngStream(std::uint64_t seed, RngPurpose purpose, std::uint64_t substream) noexcept
    : seed_(seed), purpose_(purpose), substream_(substream),
      key_(mix(mix(mix(seed + kGolden) ^ static_cast<std::uint64_t>(purpose)) + substream * kGolden)) {}

RngStream RngStream::substream(std::uint64_t index) const noexcept {
    return RngStream(seed_, purpose_, mix(substream_ + kGolden) ^ (index + 1));
}

std::uint64_t RngStream::next_u64() noexcept { return mix(key_ + (++counter_) * kGolden); }

double RngStream::uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t RngStream::index(std::uint64_t n) noexcept {
    if (n <= 1)
        return 0;
    const std::uint64_t limit = (~std::uint64_t{0}) - (~std::uint64_t{0}) % n;
    std::uint64_t v;
    do {
        v = next_u64();
    } while (v >= limit);
    return v % n;
}

double RngStream::normal() noexcept {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0)
        u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double phi = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(phi);
    has_spare_ = true;
    return r * std::cos(phi);
}

std::vector<std::size_t> RngStream::permutation(std::size_t n) noexcept {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i)
        std::swap(p[i - 1], p[index(i)]);
    return p;
}

} // namespace sfwc
