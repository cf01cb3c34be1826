#pragma once

#include <array>
#include <cstdint>

namespace kcsp {

/// Philox4x64-10 block function (Salmon, Moraes, Dror, Shaw 2011).
struct Philox4x64 {
    using Block = std::array<std::uint64_t, 4>;
    using Key = std::array<std::uint64_t, 2>;

    static constexpr std::uint64_t M0 = 0xD2E7470EE14C6C93ULL;
    static constexpr std::uint64_t M1 = 0xCA5A826395121157ULL;
    static constexpr std::uint64_t W0 = 0x9E3779B97F4A7C15ULL;
    static constexpr std::uint64_t W1 = 0xBB67AE8584CAA73BULL;

    static Block block(Block x, Key k) {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) k[0] += W0, k[1] += W1;
            const unsigned __int128 p0 = static_cast<unsigned __int128>(M0) * x[0];
            const unsigned __int128 p1 = static_cast<unsigned __int128>(M1) * x[2];
            const std::uint64_t hi0 = static_cast<std::uint64_t>(p0 >> 64), lo0 = static_cast<std::uint64_t>(p0);
            const std::uint64_t hi1 = static_cast<std::uint64_t>(p1 >> 64), lo1 = static_cast<std::uint64_t>(p1);
            x = {hi1 ^ x[1] ^ k[0], lo1, hi0 ^ x[3] ^ k[1], lo0};
        }
        return x;
    }
};

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Stream purposes, mixed into the key so different uses never share a stream.
enum class Purpose : std::uint64_t { Formula = 1, Payload = 2, Table = 3, Order = 4, Test = 5, Count = 6 };

/// One counter-based stream. The key comes from (seed, purpose, a, b); the counter
/// walks from zero, so output depends only on those four values and the draw index.
class Stream {
public:
    Stream(std::uint64_t seed, Purpose purpose, std::uint64_t a = 0, std::uint64_t b = 0) {
        std::uint64_t h = splitmix64(seed);
        h = splitmix64(h ^ static_cast<std::uint64_t>(purpose));
        h = splitmix64(h ^ a);
        key_ = {h, splitmix64(h ^ b)};
    }

    /// Direct key, for known-answer tests.
    explicit Stream(Philox4x64::Key key) : key_(key) {}

    std::uint64_t next_u64() {
        if (pos_ == 4) {
            buf_ = Philox4x64::block(ctr_, key_);
            if (++ctr_[0] == 0 && ++ctr_[1] == 0 && ++ctr_[2] == 0) ++ctr_[3];
            pos_ = 0;
        }
        return buf_[pos_++];
    }

    /// Uniform on [0, n) by Lemire's multiply-and-reject.
    std::uint64_t below(std::uint64_t n) {
        unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
        std::uint64_t lo = static_cast<std::uint64_t>(m);
        if (lo < n) {
            const std::uint64_t t = (0 - n) % n;
            while (lo < t) {
                m = static_cast<unsigned __int128>(next_u64()) * n;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

private:
    Philox4x64::Key key_{};
    Philox4x64::Block ctr_{};
    Philox4x64::Block buf_{};
    int pos_ = 4;
};

}  // namespace kcsp
