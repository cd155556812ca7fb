#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace sr2cnn {

/// splitmix64 step; used to derive independent per-layer / per-frame seeds
/// from one root seed.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t a, std::uint64_t b = 0) {
    return mix64(mix64(root ^ mix64(a)) ^ mix64(b ^ 0xD1B54A32D192ED03ull));
}

/// Deterministic random stream. Distributions are hand-rolled on top of
/// mt19937_64 so that generated values are identical across platforms and
/// standard-library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    /// uniform in [0, 1)
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    /// uniform in [lo, hi)
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// uniform integer in [0, n)
    std::uint64_t uniform_index(std::uint64_t n) { return gen_() % n; }

    /// standard normal via Box-Muller, one cached value
    double gaussian() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        has_cached_ = true;
        return r * std::cos(a);
    }

    /// Fisher-Yates; deterministic for a given seed regardless of platform.
    template <typename V>
    void shuffle(V& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_index(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 gen_;
    bool has_cached_ = false;
    double cached_ = 0.0;
};

}  // namespace sr2cnn
