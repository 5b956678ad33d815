#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"

namespace regime_bench {

inline constexpr int kStepMinutes = 5;
inline constexpr int kStepsPerDay = 288;
inline constexpr int kStepsPerHour = 12;
inline constexpr int kMinutesPerDay = 1440;

/// Floor division for possibly negative timestamps.
inline constexpr std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    return a / b - ((a % b != 0) && ((a < 0) != (b < 0)));
}

inline constexpr std::int64_t floor_mod(std::int64_t a, std::int64_t b) {
    return a - floor_div(a, b) * b;
}

enum class Exog : std::size_t { carbs = 0, bolus = 1, basal = 2 };

/// One raw CSV row. Timestamp in minutes since epoch.
struct Sample {
    std::int64_t timestamp = 0;
    std::optional<double> glucose;
    double carbs = 0.0;
    double bolus = 0.0;
    double basal = 0.0;
};

/// A contiguous trace on the 5-minute grid.
struct Episode {
    std::string patient_id;
    int episode_id = 0;
    std::int64_t start_minute = 0;  // multiple of 5
    std::vector<std::optional<double>> glucose;
    std::vector<std::array<double, 3>> exog;  // carbs, bolus, basal

    std::size_t size() const noexcept { return glucose.size(); }
    bool observed(std::size_t t) const { return glucose[t].has_value(); }
    double exog_at(std::size_t t, Exog c) const { return exog[t][static_cast<std::size_t>(c)]; }

    int start_time_of_day() const {
        return static_cast<int>(floor_mod(start_minute, kMinutesPerDay));
    }
    /// Grid step of day (0..287) of index t.
    int step_of_day(std::size_t t) const {
        return static_cast<int>((start_time_of_day() / kStepMinutes + static_cast<std::int64_t>(t)) %
                                kStepsPerDay);
    }
    int hour_of(std::size_t t) const { return step_of_day(t) / kStepsPerHour; }
    /// Calendar day (days since epoch) of index t.
    std::int64_t day_of(std::size_t t) const {
        return floor_div(start_minute + static_cast<std::int64_t>(t) * kStepMinutes, kMinutesPerDay);
    }

    std::vector<std::uint8_t> observed_flags() const {
        std::vector<std::uint8_t> out(size());
        for (std::size_t t = 0; t < size(); ++t) out[t] = observed(t) ? 1 : 0;
        return out;
    }

    /// Glucose as dense values. Throws if any sample is missing.
    std::vector<double> dense_glucose() const {
        std::vector<double> out(size());
        for (std::size_t t = 0; t < size(); ++t) {
            if (!glucose[t])
                throw DimensionError("episode " + patient_id + "/" + std::to_string(episode_id) +
                                     " has missing glucose at index " + std::to_string(t));
            out[t] = *glucose[t];
        }
        return out;
    }

    bool fully_observed() const {
        for (const auto& g : glucose)
            if (!g) return false;
        return true;
    }
};

enum class Regime { day, night };

inline constexpr Regime regime_of_hour(int hour) noexcept {
    return hour < 6 ? Regime::night : Regime::day;
}

inline constexpr std::string_view to_string(Regime r) noexcept {
    return r == Regime::day ? "day" : "night";
}

enum class Provenance { empirical, protocol_A, protocol_B, protocol_C };

inline constexpr std::string_view to_string(Provenance p) noexcept {
    switch (p) {
        case Provenance::empirical: return "empirical";
        case Provenance::protocol_A: return "protocol_A";
        case Provenance::protocol_B: return "protocol_B";
        case Provenance::protocol_C: return "protocol_C";
    }
    return "empirical";
}

inline Provenance provenance_from_string(std::string_view s) {
    if (s == "empirical") return Provenance::empirical;
    if (s == "protocol_A") return Provenance::protocol_A;
    if (s == "protocol_B") return Provenance::protocol_B;
    if (s == "protocol_C") return Provenance::protocol_C;
    throw ConfigError("unknown mask provenance '" + std::string(s) + "'");
}

/// Half-open run [start, start + length) of grid indices.
struct Run {
    std::size_t start = 0;
    std::size_t length = 0;
    std::size_t end() const noexcept { return start + length; }
    friend bool operator==(const Run&, const Run&) = default;
};

/// Binary retention vector: 1 = retained, 0 = masked.
struct Mask {
    std::vector<std::uint8_t> bits;
    std::uint64_t seed = 0;
    Provenance provenance = Provenance::empirical;
    std::string condition;  // free-form label, e.g. "ratio=0.1"

    std::size_t size() const noexcept { return bits.size(); }
    bool retained(std::size_t t) const { return bits[t] != 0; }
    std::size_t masked_count() const {
        std::size_t n = 0;
        for (auto b : bits) n += (b == 0);
        return n;
    }

    static Mask all_retained(std::size_t n) {
        Mask m;
        m.bits.assign(n, 1);
        return m;
    }
};

/// Maximal runs where `bits[t] == value`.
inline std::vector<Run> runs_of(const std::vector<std::uint8_t>& bits, std::uint8_t value) {
    std::vector<Run> out;
    std::size_t t = 0;
    while (t < bits.size()) {
        if ((bits[t] != 0) == (value != 0)) {
            const std::size_t s = t;
            while (t < bits.size() && (bits[t] != 0) == (value != 0)) ++t;
            out.push_back({s, t - s});
        } else {
            ++t;
        }
    }
    return out;
}

inline std::vector<Run> masked_runs(const Mask& m) { return runs_of(m.bits, 0); }

inline Mask mask_from_runs(std::size_t n, const std::vector<Run>& gaps) {
    Mask m = Mask::all_retained(n);
    for (const auto& g : gaps)
        for (std::size_t t = g.start; t < g.end() && t < n; ++t) m.bits[t] = 0;
    return m;
}

inline void check_same_length(const Episode& ep, const Mask& m) {
    if (ep.size() != m.size())
        throw DimensionError("mask length " + std::to_string(m.size()) + " != episode length " +
                             std::to_string(ep.size()) + " for " + ep.patient_id + "/" +
                             std::to_string(ep.episode_id));
}

}  // namespace regime_bench
