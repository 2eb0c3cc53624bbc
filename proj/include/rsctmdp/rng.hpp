#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace rsctmdp {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
struct Philox4x32 {
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static constexpr Counter block(Counter ctr, Key key) {
        constexpr std::uint32_t kMul0 = 0xD2511F53u;
        constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
        constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
        constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
            const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
            ctr = Counter{static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
                          static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
        return ctr;
    }
};

/// Random stream keyed by (master seed, stream id); the draw counter
/// advances per 128-bit block. Streams with distinct ids never overlap.
class CounterStream {
public:
    CounterStream(std::uint64_t master_seed, std::uint64_t stream)
        : key_{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32)},
          stream_(stream) {}

    std::uint64_t next_u64() {
        if (buffered_ == 0) {
            block_ = Philox4x32::block(
                {static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
                 static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)},
                key_);
            ++counter_;
            buffered_ = 2;
        }
        const int base = (2 - buffered_) * 2;
        --buffered_;
        return (static_cast<std::uint64_t>(block_[base + 1]) << 32) | block_[base];
    }

    /// Uniform on the open interval (0, 1).
    double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

    /// Exponential with the given positive rate.
    double exponential(double rate) { return -std::log(uniform()) / rate; }

    std::uint64_t blocks_drawn() const { return counter_; }

private:
    Philox4x32::Key key_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
    Philox4x32::Counter block_{};
    int buffered_ = 0;
};

}  // namespace rsctmdp
