#pragma once

// Counter-based random numbers (Philox4x32-10). A stream is fully determined by
// a 64-bit seed and a 64-bit stream id, so path blocks can be generated in any
// order, on any thread, with identical results.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace futvol {

class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter apply(Counter ctr, Key key) noexcept {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += kW0;
                key[1] += kW1;
            }
            const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
            const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const auto lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const auto lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kM0 = 0xD2511F53u;
    static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kW0 = 0x9E3779B9u;
    static constexpr std::uint32_t kW1 = 0xBB67AE85u;
};

/// Sequential view of one Philox stream: counter words 2-3 hold the stream id,
/// words 0-1 the block index within the stream.
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t stream) noexcept
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          stream_(stream) {}

    /// Uniform on the open interval (0, 1) with 53 random bits.
    double uniform() noexcept {
        const std::uint64_t hi = next_u32() >> 5;
        const std::uint64_t lo = next_u32() >> 6;
        return (static_cast<double>((hi << 26) | lo) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller; the second variate of each pair is cached.
    double normal() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    std::uint32_t next_u32() noexcept {
        if (used_ == 4) refill();
        return buffer_[used_++];
    }

private:
    void refill() noexcept {
        const Philox4x32::Counter ctr{static_cast<std::uint32_t>(block_),
                                      static_cast<std::uint32_t>(block_ >> 32),
                                      static_cast<std::uint32_t>(stream_),
                                      static_cast<std::uint32_t>(stream_ >> 32)};
        buffer_ = Philox4x32::apply(ctr, key_);
        ++block_;
        used_ = 0;
    }

    Philox4x32::Key key_;
    std::uint64_t stream_;
    std::uint64_t block_ = 0;
    Philox4x32::Counter buffer_{};
    int used_ = 4;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Mixes a structured stream identifier into a single 64-bit stream id.
[[nodiscard]] constexpr std::uint64_t stream_id(std::uint64_t path, std::uint64_t sub,
                                                std::uint64_t tag = 0) noexcept {
    // path in the low 40 bits, sub-stream in the next 20, tag in the top 4
    return (path & ((1ULL << 40) - 1)) | ((sub & ((1ULL << 20) - 1)) << 40) | ((tag & 0xFULL) << 60);
}

}  // namespace futvol
