#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fisst {

/// Inconsistent matrix/vector dimensions, or more detections than targets.
class DimensionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An index or count outside its admissible range.
class RangeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A linear-algebra failure that must never pass silently
/// (singular innovation covariance, non-PD covariance, ...).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Enumeration would exceed its configured cap.
class ExplosionError : public std::runtime_error {
public:
    ExplosionError(const std::string& what, int scan = -1)
        : std::runtime_error(what), scan_index(scan) {}
    int scan_index;
};

/// Malformed scenario configuration or trace file.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// e * log_base with the 0 * log(0) = 0 convention used throughout the
/// log-domain prior formulas.
inline double int_pow_log(std::int64_t e, double log_base) {
    if (e == 0) return 0.0;
    return static_cast<double>(e) * log_base;
}

/// log(sum_i exp(x_i)); returns -inf for an empty or all -inf input.
inline double log_sum_exp(std::span<const double> xs) {
    double max_x = kNegInf;
    for (double x : xs) max_x = std::max(max_x, x);
    if (!std::isfinite(max_x)) return max_x;
    double sum = 0.0;
    for (double x : xs) sum += std::exp(x - max_x);
    return max_x + std::log(sum);
}

inline double log_sum_exp(const std::vector<double>& xs) {
    return log_sum_exp(std::span<const double>(xs));
}

/// log(exp(a) + exp(b))
inline double log_add_exp(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

/// Standard normal CDF, stable in both tails.
inline double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace detail

} // namespace fisst
