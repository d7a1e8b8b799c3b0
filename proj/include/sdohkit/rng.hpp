#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace sdohkit {

// Deterministic RNG used everywhere randomness is needed. All stochastic
// stages derive their generator from (global seed, stream name[, index]) so
// that reruns reproduce bit-identical output regardless of stage order.
//
// Distributions are implemented directly on top of the mt19937_64 bit stream
// (the engine's output sequence is fixed by the standard; the library
// distribution adaptors are not).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1) with 53 bits of resolution.
    double uniform01() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform01();
    }

    // Uniform integer in [lo, hi], rejection-sampled so there is no modulo bias.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        if (span == 0) return static_cast<std::int64_t>(gen_());  // full range
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        std::uint64_t x;
        do {
            x = gen_();
        } while (x >= limit);
        return lo + static_cast<std::int64_t>(x % span);
    }

    std::size_t index(std::size_t n) {
        return static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(n) - 1));
    }

    bool bernoulli(double p) { return uniform01() < p; }

    // Box-Muller; the sine partner is discarded to keep the stream stateless.
    double normal(double mean = 0.0, double sd = 1.0) {
        double u1 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double u2 = uniform01();
        const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
        return mean + sd * z;
    }

    // Normal resampled until it lands inside [lo, hi].
    double truncated_normal(double mean, double sd, double lo, double hi) {
        for (int i = 0; i < 1000; ++i) {
            const double x = normal(mean, sd);
            if (x >= lo && x <= hi) return x;
        }
        return mean < lo ? lo : (mean > hi ? hi : mean);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    std::vector<std::size_t> permutation(std::size_t n) {
        std::vector<std::size_t> p(n);
        for (std::size_t i = 0; i < n; ++i) p[i] = i;
        shuffle(p);
        return p;
    }

private:
    static constexpr double kPi = 3.14159265358979323846;
    std::mt19937_64 gen_;
};

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (const char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Named substream derivation: seed + stream name (+ index) -> engine seed.
inline std::uint64_t substream_seed(std::uint64_t seed, std::string_view stream,
                                    std::uint64_t index = 0) {
    return mix64(mix64(seed ^ fnv1a64(stream)) + index);
}

inline Rng substream(std::uint64_t seed, std::string_view stream, std::uint64_t index = 0) {
    return Rng(substream_seed(seed, stream, index));
}

}  // namespace sdohkit
