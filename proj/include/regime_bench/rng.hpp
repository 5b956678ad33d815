#pragma once

// Seedable generator and the handful of distributions the harness needs.
// The standard <random> distributions are implementation-defined, so
// uniform/normal conversions are written out here to keep masks
// bit-identical across toolchains.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string_view>

namespace regime_bench {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

/// Independent stream seed for one (patient, episode) pair.
inline constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view patient_id,
                                           std::int64_t episode_id) noexcept {
    std::uint64_t h = splitmix64(master);
    h = splitmix64(h ^ fnv1a(patient_id));
    h = splitmix64(h ^ static_cast<std::uint64_t>(episode_id));
    return h;
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t x;
        do {
            x = next();
        } while (x >= limit);
        return x % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Standard normal via Box-Muller (cosine branch only).
    double normal() {
        double u1;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    template <typename It>
    void shuffle(It first, It last) {
        const auto n = static_cast<std::uint64_t>(last - first);
        for (std::uint64_t i = n; i > 1; --i) {
            const auto j = below(i);
            std::swap(first[i - 1], first[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

/// Standard normal CDF.
inline double norm_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

/// Standard normal quantile: Acklam's rational approximation refined by one
/// Halley step, good to ~1e-15 over (0, 1).
inline double norm_quantile(double p) {
    if (p <= 0.0) return -std::numeric_limits<double>::infinity();
    if (p >= 1.0) return std::numeric_limits<double>::infinity();

    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                   -2.759285104469687e+02, 1.383577518672690e+02,
                                   -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                   -1.556989798598866e+02, 6.680131188771972e+01,
                                   -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                   -2.400758277161838e+00, -2.549732539343734e+00,
                                   4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                   2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double p_low = 0.02425;

    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double e = norm_cdf(x) - p;
    const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
    return x - u / (1.0 + 0.5 * x * u);
}

/// Normal(mean, sd) truncated to [lo, hi] by inverse CDF. Works from the
/// upper tail when the interval sits above the mean to avoid cancellation.
inline double truncated_normal(Rng& rng, double mean, double sd, double lo, double hi) {
    const double v = rng.uniform();
    const double a = (lo - mean) / sd;
    const double b = (hi - mean) / sd;
    double z;
    if (a > 0.0) {
        const double qa = norm_cdf(-a);
        const double qb = norm_cdf(-b);
        z = -norm_quantile(qa - v * (qa - qb));
    } else {
        const double pa = norm_cdf(a);
        const double pb = norm_cdf(b);
        z = norm_quantile(pa + v * (pb - pa));
    }
    double x = mean + sd * z;
    if (!(x >= lo)) x = lo;
    if (x > hi) x = hi;
    return x;
}

/// Exponential with rate `rate` shifted to start at lo and truncated at hi.
inline double truncated_exponential(Rng& rng, double rate, double lo, double hi) {
    const double v = rng.uniform();
    const double span_mass = -std::expm1(-rate * (hi - lo));
    double x = lo - std::log1p(-v * span_mass) / rate;
    if (x > hi) x = hi;
    return x;
}

}  // namespace regime_bench
