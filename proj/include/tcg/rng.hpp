#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace tcg {

/// SplitMix64 finalizer. Used to derive independent stream seeds from a
/// (seed, stream id) pair.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(splitmix64(seed) ^ (stream * 0xd1b54a32d192ed03ULL));
}

/// Portable random source: the engine is std::mt19937_64, whose output
/// sequence is fixed by the C++ standard. The std:: distributions are
/// implementation-defined, so every variate transform lives here instead.
/// See docs/rng.md for the transforms and test vectors.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 bits of resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). Rejection keeps it unbiased.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n);
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Inverse-CDF exponential variate.
    double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

    /// Marsaglia polar method; the spare variate is discarded so each call
    /// consumes a whole number of rejection rounds.
    double normal(double mean, double sigma) {
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        return mean + sigma * u * std::sqrt(-2.0 * std::log(s) / s);
    }

    /// exp(N(0, sigma)): multiplicative jitter with median 1.
    double lognormal_jitter(double sigma) { return std::exp(normal(0.0, sigma)); }

    /// Fisher-Yates shuffle driven by below().
    template <class RandomIt>
    void shuffle(RandomIt first, RandomIt last) {
        const auto n = static_cast<std::uint64_t>(last - first);
        for (std::uint64_t i = n; i > 1; --i) {
            const std::uint64_t j = below(i);
            std::swap(first[i - 1], first[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace tcg
