#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "fisst/common.hpp"

namespace fisst {

/// Seedable random source with every sampling transform spelled out, so
/// that a (seed, call sequence) pair reproduces the same stream anywhere
/// the standard-mandated mt19937_64 sequence is available.
///
/// Transforms:
///   uniform01  — (x >> 11) * 2^-53
///   normal     — Box-Muller (trigonometric form), second value cached
///   poisson    — Knuth product-of-uniforms search
///   bounded    — rejection sampling on the top multiple of n
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1).
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform01();
    }

    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u1 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * M_PI * u2;
        cached_ = r * std::sin(theta);
        have_cached_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    int poisson(double lambda) {
        if (lambda < 0.0) throw RangeError("poisson: negative rate");
        if (lambda == 0.0) return 0;
        if (lambda > 1e4) throw RangeError("poisson: rate too large for product method");
        const double limit = std::exp(-lambda);
        int k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= uniform01();
        } while (p > limit);
        return k - 1;
    }

    /// Uniform integer in [0, n).
    std::uint64_t bounded(std::uint64_t n) {
        if (n == 0) throw RangeError("bounded: n must be positive");
        const std::uint64_t threshold = (~n + 1) % n; // 2^64 mod n
        for (;;) {
            const std::uint64_t x = engine_();
            if (x >= threshold) return x % n;
        }
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[bounded(i)]);
        }
    }

private:
    std::mt19937_64 engine_;
    double cached_ = 0.0;
    bool have_cached_ = false;
};

} // namespace fisst
