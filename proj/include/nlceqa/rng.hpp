#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <string_view>

namespace nlceqa {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// The stream is fully determined by a 64-bit key and a 64-bit stream id, so
/// independent draws can be addressed as (seed, index) without shared state.
/// Satisfies UniformRandomBitGenerator and can drive the <random> distributions.
class Philox4x32 {
  public:
    using result_type = std::uint64_t;

    explicit Philox4x32(std::uint64_t seed = 0, std::uint64_t stream = 0) noexcept
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          counter_{0, 0, static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)} {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        if(cursor_ >= 2) refill();
        const auto lo = block_[2 * cursor_];
        const auto hi = block_[2 * cursor_ + 1];
        ++cursor_;
        return (static_cast<std::uint64_t>(hi) << 32) | lo;
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    [[nodiscard]] std::uint64_t seed() const noexcept {
        return (static_cast<std::uint64_t>(key_[1]) << 32) | key_[0];
    }

  private:
    void refill() noexcept {
        auto ctr = counter_;
        auto key = key_;
        for(int round = 0; round < 10; ++round) {
            ctr = single_round(ctr, key);
            key[0] += 0x9E3779B9u;
            key[1] += 0xBB67AE85u;
        }
        block_ = ctr;
        cursor_ = 0;
        if(++counter_[0] == 0) ++counter_[1];
    }

    static std::array<std::uint32_t, 4> single_round(const std::array<std::uint32_t, 4> &c,
                                                     const std::array<std::uint32_t, 2> &k) noexcept {
        const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * c[0];
        const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * c[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
        return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }

    std::array<std::uint32_t, 2> key_;
    std::array<std::uint32_t, 4> counter_;
    std::array<std::uint32_t, 4> block_{};
    int cursor_ = 2;
};

/// SplitMix64 finalizer; used to derive child seeds.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) noexcept {
    return mix64(parent ^ mix64(index + 0x632BE59BD9B4E019ull));
}

/// Seed keyed by a label (FNV-1a), so results do not depend on execution order.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::string_view label) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for(const char c : label) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ull;
    }
    return derive_seed(parent, h);
}

} // namespace nlceqa
