#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace lpa {

/// SplitMix64 step; the basis for all derived seed streams.
std::uint64_t splitmix64(std::uint64_t state);

/// Derives an independent seed stream from a user seed and a stream tag.
/// Different tags give statistically unrelated streams for the same seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// Uniform double in [0,1) from the top 53 bits of a 64-bit draw.
/// Bit-exact regardless of the standard library's distribution internals.
template <typename Rng>
double rng_uniform(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <typename Rng>
double rng_uniform(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * rng_uniform(rng);
}

/// Uniform integer in [0, n) by rejection; no distribution objects, so the
/// draw sequence is identical across standard libraries.
template <typename Rng>
std::uint64_t rng_below(Rng& rng, std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
        const std::uint64_t r = rng();
        if (r >= threshold) return r % n;
    }
}

/// Fisher-Yates with rng_below; a portable stand-in for std::shuffle.
template <typename T, typename Rng>
void deterministic_shuffle(std::vector<T>& values, Rng& rng) {
    for (std::size_t i = values.size(); i > 1; --i)
        std::swap(values[i - 1], values[rng_below(rng, i)]);
}

/// FNV-1a 64-bit checksum (manifest integrity listing, not cryptographic).
std::uint64_t fnv1a64(std::span<const unsigned char> bytes);
std::uint64_t fnv1a64(std::string_view text);
std::uint64_t fnv1a64_file(const std::filesystem::path& path);

std::string to_hex(std::uint64_t value);

/// Writes via a temp file in the same directory, then renames into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

/// printf("%.{significant}g") with a locale-independent result.
std::string format_g(double value, int significant);

std::string iso8601_utc_now();

/// Runs body(i) for i in [0, count). With threads <= 1 runs inline; otherwise
/// splits the index range over a fixed set of workers. The body must only
/// write to per-index slots so results are independent of the thread count.
void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t)>& body);

}  // namespace lpa
