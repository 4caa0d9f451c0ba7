#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string_view>

namespace vizgrad {

// 64-bit FNV-1a, used to turn stream labels and request bodies into keys.
constexpr std::uint64_t fnv1a64(std::string_view text) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Philox4x32-10 block function. Stateless: the output depends only on
// (key, counter), so draws are reproducible and random-access.
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) noexcept {
    constexpr std::uint32_t m0 = 0xD2511F53u;
    constexpr std::uint32_t m1 = 0xCD9E8D57u;
    constexpr std::uint32_t w0 = 0x9E3779B9u;
    constexpr std::uint32_t w1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(m0) * ctr[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(m1) * ctr[2];
        ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
               static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
        key[0] += w0;
        key[1] += w1;
    }
    return ctr;
}

// Counter-based generator keyed by (seed, stream label). Each draw consumes
// one counter value, so streams with different labels never interfere and a
// stream can be repositioned with seek().
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::string_view stream, std::uint64_t start = 0) noexcept
        : seed_(seed), stream_(fnv1a64(stream)), counter_(start) {}

    CounterRng(std::uint64_t seed, std::uint64_t stream_key, std::uint64_t start = 0) noexcept
        : seed_(seed), stream_(stream_key), counter_(start) {}

    // Child stream, e.g. one per bootstrap replicate or per iteration.
    [[nodiscard]] CounterRng substream(std::uint64_t index) const noexcept {
        std::uint64_t k = stream_ ^ (index + 0x9E3779B97F4A7C15ULL + (stream_ << 6) + (stream_ >> 2));
        k *= 0xff51afd7ed558ccdULL;
        k ^= k >> 33;
        return CounterRng(seed_, k, 0);
    }

    void seek(std::uint64_t counter) noexcept { counter_ = counter; }
    [[nodiscard]] std::uint64_t position() const noexcept { return counter_; }

    std::array<std::uint32_t, 4> block() noexcept {
        const std::uint64_t c = counter_++;
        return philox4x32({static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32),
                           static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)},
                          {static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)});
    }

    std::uint64_t next_u64() noexcept {
        const auto b = block();
        return (static_cast<std::uint64_t>(b[0]) << 32) | b[1];
    }

    // Uniform in the open interval (0, 1).
    double uniform() noexcept { return to_open_unit(next_u64()); }

    // Uniform integer in [0, n), n > 0 (Lemire's multiply-shift, unbiased).
    std::uint64_t below(std::uint64_t n) noexcept {
        for (;;) {
            const auto x = next_u64();
            const auto m = static_cast<unsigned __int128>(x) * n;
            auto low = static_cast<std::uint64_t>(m);
            if (low >= n || low >= (-n) % n) {
                return static_cast<std::uint64_t>(m >> 64);
            }
        }
    }

    double normal() noexcept {
        const auto b = block();
        const double u1 = to_open_unit((static_cast<std::uint64_t>(b[0]) << 32) | b[1]);
        const double u2 = to_open_unit((static_cast<std::uint64_t>(b[2]) << 32) | b[3]);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    // Standard Gumbel(0, 1).
    double gumbel() noexcept { return -std::log(-std::log(uniform())); }

    // +1 or -1 with equal probability.
    double rademacher() noexcept { return (next_u64() >> 63) ? 1.0 : -1.0; }

private:
    static double to_open_unit(std::uint64_t x) noexcept {
        return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
    }

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_;
};

}  // namespace vizgrad
