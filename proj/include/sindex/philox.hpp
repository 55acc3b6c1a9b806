#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace sindex {

/// Philox4x32-10 counter-based generator. Distinct (key, counter prefix) pairs give independent streams,
/// so each (seed, replication, batch) draws without touching any other stream's state.
class Philox4x32 {
public:
    using result_type = std::uint32_t;
    using Block = std::array<std::uint32_t, 4>;

    Philox4x32(std::uint64_t key, std::uint64_t stream_hi, std::uint32_t stream_lo)
        : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)},
          ctr_{0, stream_lo, static_cast<std::uint32_t>(stream_hi), static_cast<std::uint32_t>(stream_hi >> 32)}
    {
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()()
    {
        if (pos_ == 4) {
            buf_ = encrypt(ctr_, key_);
            ++ctr_[0];
            pos_ = 0;
        }
        return buf_[pos_++];
    }

    static Block encrypt(Block ctr, std::array<std::uint32_t, 2> key)
    {
        constexpr std::uint64_t m0 = 0xD2511F53u, m1 = 0xCD9E8D57u;
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = m0 * ctr[0];
            const std::uint64_t p1 = m1 * ctr[2];
            ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
                   static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
            key[0] += 0x9E3779B9u;
            key[1] += 0xBB67AE85u;
        }
        return ctr;
    }

private:
    std::array<std::uint32_t, 2> key_;
    Block ctr_;
    Block buf_{};
    int pos_ = 4;
};

} // namespace sindex
