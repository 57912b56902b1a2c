#ifndef LAYEREDIT_RNG_HPP
#define LAYEREDIT_RNG_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string_view>

namespace layeredit {

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

inline std::uint64_t fnv1a(std::span<const unsigned char> bytes, std::uint64_t h = kFnvOffset) {
    for (unsigned char b : bytes) {
        h ^= b;
        h *= kFnvPrime;
    }
    return h;
}

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = kFnvOffset) {
    return fnv1a(std::span(reinterpret_cast<const unsigned char*>(s.data()), s.size()), h);
}

inline constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline constexpr std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
    return mix64(a ^ (mix64(b) + 0x632be59bd9b4e019ULL + (a << 6) + (a >> 2)));
}

template <typename... Rest>
constexpr std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b, Rest... rest) {
    return hash_combine(hash_combine(a, b), rest...);
}

/// Counter-based generator: the i-th draw is a pure function of (key, i), so
/// any stream can be regenerated or skipped into without replaying it.
class CounterRng {
public:
    explicit constexpr CounterRng(std::uint64_t key, std::uint64_t counter = 0) : key_(key), counter_(counter) {}

    constexpr std::uint64_t next_u64() { return mix64(key_ ^ mix64(counter_++)); }

    /// Uniform in (0, 1].
    double uniform_open0() { return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53; }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [lo, hi].
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        if (span == 0) return static_cast<std::int64_t>(next_u64());
        // Lemire's multiply-shift; bias is below 2^-32 for the ranges used here.
        auto r = static_cast<unsigned __int128>(next_u64()) * span;
        return lo + static_cast<std::int64_t>(r >> 64);
    }

    /// Standard normal via Box-Muller; consumes two draws per sample.
    double normal() {
        double u1 = uniform_open0();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    std::uint64_t key() const { return key_; }
    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_;
};

}  // namespace layeredit

#endif
