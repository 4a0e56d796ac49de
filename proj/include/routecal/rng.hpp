#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <utility>

namespace routecal {

/// Replayable random stream identified by (root_seed, stream_index).
///
/// Generator: xoshiro256** whose 256-bit state is filled by four SplitMix64
/// outputs. The SplitMix64 seed is `mix(root_seed) ^ mix(stream_index + C)`
/// where `mix` is the SplitMix64 finalizer and C = 0x632BE59BD9B4E019. All
/// derived draws (uniform, bounded integer, normal, gamma, beta) use only
/// integer arithmetic plus <cmath> elementary functions, so a given
/// (root_seed, stream_index) pair yields the same sequence on every platform
/// with IEEE-754 doubles.
///
/// Resampling procedures take stream `i` for replicate `i`, which makes their
/// output independent of how replicates are scheduled across threads.
class RngStream {
public:
    RngStream(std::uint64_t root_seed, std::uint64_t stream_index);

    std::uint64_t root_seed() const noexcept { return root_seed_; }
    std::uint64_t stream_index() const noexcept { return stream_index_; }

    std::uint64_t next_u64() noexcept;

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept;

    /// Uniform integer on [0, bound). Lemire's multiply-and-reject method.
    std::uint64_t below(std::uint64_t bound) noexcept;

    /// Standard normal via Box-Muller (one draw per call, no caching).
    double normal() noexcept;

    /// Gamma(shape, 1) via Marsaglia-Tsang.
    double gamma(double shape) noexcept;

    double beta(double a, double b) noexcept;

    bool bernoulli(double p) noexcept { return uniform() < p; }

    template <typename T>
    void shuffle(std::span<T> items) noexcept {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            using std::swap;
            swap(items[i - 1], items[j]);
        }
    }

private:
    std::uint64_t root_seed_;
    std::uint64_t stream_index_;
    std::array<std::uint64_t, 4> state_{};
};

inline RngStream derive_stream(std::uint64_t root_seed, std::uint64_t index) {
    return RngStream(root_seed, index);
}

// Stream-index families, so that different procedures driven by the same
// user seed never share a stream.
namespace streams {
inline constexpr std::uint64_t kSplit = 0;
inline constexpr std::uint64_t kBootstrap = 1ull << 40;
inline constexpr std::uint64_t kPermutation = 2ull << 40;
inline constexpr std::uint64_t kFolds = 3ull << 40;
inline constexpr std::uint64_t kProbe = 4ull << 40;
inline constexpr std::uint64_t kSynthetic = 5ull << 40;
}  // namespace streams

}  // namespace routecal
