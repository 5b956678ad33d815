#pragma once

// Geometric CGM-like fixtures: flat baseline, triangular meal excursions,
// an optional hypoglycemic dip inside a Temporal Control Reset window,
// additive Gaussian noise. One episode per day.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "core_data.hpp"
#include "csv.hpp"
#include "error.hpp"
#include "missingness.hpp"
#include "protocols.hpp"
#include "rng.hpp"
#include "types.hpp"

namespace regime_bench {

enum class SampleRegime { stationary, peak, hypo, other };

inline constexpr std::string_view to_string(SampleRegime r) noexcept {
    switch (r) {
        case SampleRegime::stationary: return "stationary";
        case SampleRegime::peak: return "peak";
        case SampleRegime::hypo: return "hypo";
        case SampleRegime::other: return "other";
    }
    return "other";
}

struct SynthConfig {
    int days = 1;
    double baseline = 100.0;
    std::vector<int> meal_times = {420, 780, 1140};  // minutes of day
    double meal_carbs = 50.0;
    double meal_bolus = 5.0;
    double basal = 1.0;
    double peak_amplitude = 80.0;
    int peak_rise = 60;   // minutes
    int peak_fall = 120;  // minutes
    /// Dip minimum is 70 - hypo_depth; no dip (and no TCR) when unset.
    std::optional<double> hypo_depth;
    std::size_t tcr_meal = 0;   // which meal triggers the TCR
    int tcr_delay = 150;        // minutes after the meal
    int tcr_duration = 240;
    double tcr_basal_factor = 0.05;
    int dip_offset = 30;        // dip start, minutes after TCR activation
    int dip_half_width = 45;
    double noise_std = 0.0;
    std::uint64_t seed = 7;
    std::string patient_id = "synth";
    std::int64_t start_day = 19723;  // 2024-01-01

    void validate() const {
        if (days < 1) throw ConfigError("days must be >= 1");
        if (baseline < 70.0 || baseline > 140.0) throw ConfigError("baseline must lie in [70, 140]");
        if (peak_amplitude < 0.0) throw ConfigError("peak amplitude must be >= 0");
        if (noise_std < 0.0) throw ConfigError("noise_std must be >= 0");
        if (peak_rise <= 0 || peak_fall <= 0) throw ConfigError("peak rise/fall must be positive");
        if (hypo_depth && (*hypo_depth < 0.0 || 70.0 - *hypo_depth < kGlucoseMin))
            throw ConfigError("hypo depth must keep the minimum within [20, 70]");
        if (hypo_depth && tcr_meal >= meal_times.size()) throw ConfigError("tcr_meal out of range");
        if (dip_half_width <= 0) throw ConfigError("dip half width must be positive");
    }
};

struct SynthData {
    std::vector<Episode> episodes;
    std::vector<TcrInterval> tcr;
    std::vector<std::vector<SampleRegime>> labels;  // per episode, per sample
};

namespace detail {

struct Interval {
    int begin;  // minutes of day, inclusive
    int end;    // exclusive
};

inline double triangle(double x, double rise, double fall, double height) {
    if (x <= 0.0 || x >= rise + fall) return 0.0;
    return x <= rise ? height * x / rise : height * (1.0 - (x - rise) / fall);
}

}  // namespace detail

inline SynthData generate(const SynthConfig& cfg) {
    cfg.validate();

    std::vector<detail::Interval> spans;
    for (int m : cfg.meal_times) {
        if (m < 0 || m >= kMinutesPerDay || m % kStepMinutes) throw ConfigError("meal times must be grid minutes of day");
        spans.push_back({m, m + cfg.peak_rise + cfg.peak_fall});
    }
    std::optional<detail::Interval> dip;
    int tcr_start = 0;
    if (cfg.hypo_depth) {
        tcr_start = cfg.meal_times[cfg.tcr_meal] + cfg.tcr_delay;
        const int begin = tcr_start + cfg.dip_offset;
        dip = detail::Interval{begin, begin + 2 * cfg.dip_half_width};
        if (dip->end > tcr_start + cfg.tcr_duration) throw ConfigError("hypoglycemic dip extends past the TCR window");
        spans.push_back(*dip);
    }
    for (const auto& s : spans)
        if (s.end > kMinutesPerDay) throw ConfigError("excursion crosses the end of the day");
    for (std::size_t i = 0; i < spans.size(); ++i)
        for (std::size_t j = i + 1; j < spans.size(); ++j)
            if (spans[i].begin < spans[j].end && spans[j].begin < spans[i].end)
                throw ConfigError("configured excursions overlap");

    SynthData out;
    for (int day = 0; day < cfg.days; ++day) {
        Rng rng(derive_seed(cfg.seed, cfg.patient_id, day));
        Episode ep;
        ep.patient_id = cfg.patient_id;
        ep.episode_id = day;
        ep.start_minute = (cfg.start_day + day) * static_cast<std::int64_t>(kMinutesPerDay);
        ep.glucose.resize(kStepsPerDay);
        ep.exog.assign(kStepsPerDay, {0.0, 0.0, cfg.basal});
        std::vector<SampleRegime> labels(kStepsPerDay, SampleRegime::other);
        std::vector<std::uint8_t> excursion(kStepsPerDay, 0);

        for (std::size_t t = 0; t < kStepsPerDay; ++t) {
            const double minute = static_cast<double>(t * kStepMinutes);
            double g = cfg.baseline;
            for (int m : cfg.meal_times) {
                const double x = minute - m;
                const double rise = detail::triangle(x, cfg.peak_rise, cfg.peak_fall, cfg.peak_amplitude);
                g += rise;
                if (x > 0.0 && x < cfg.peak_rise + cfg.peak_fall) {
                    labels[t] = SampleRegime::peak;
                    excursion[t] = 1;
                }
            }
            if (dip) {
                const double depth = cfg.baseline - (70.0 - *cfg.hypo_depth);
                const double x = minute - dip->begin;
                g -= detail::triangle(x, cfg.dip_half_width, cfg.dip_half_width, depth);
                if (x > 0.0 && x < 2.0 * cfg.dip_half_width) {
                    labels[t] = SampleRegime::hypo;
                    excursion[t] = 1;
                }
            }
            if (cfg.noise_std > 0.0) g += rng.normal(0.0, cfg.noise_std);
            ep.glucose[t] = std::clamp(g, kGlucoseMin, kGlucoseMax);
        }
        for (int m : cfg.meal_times) {
            const auto t = static_cast<std::size_t>(m / kStepMinutes);
            ep.exog[t][0] = cfg.meal_carbs;
            ep.exog[t][1] = cfg.meal_bolus;
        }
        if (dip) {
            const auto s = static_cast<std::size_t>(tcr_start / kStepMinutes);
            const auto e = std::min<std::size_t>(kStepsPerDay, static_cast<std::size_t>((tcr_start + cfg.tcr_duration) / kStepMinutes));
            for (std::size_t t = s; t < e; ++t) ep.exog[t][2] = cfg.basal * cfg.tcr_basal_factor;
            out.tcr.push_back({cfg.patient_id, day, s, e});
        }

        // Stationary: baseline samples at least one step clear of any
        // excursion, with a full event-free washout behind them.
        const std::size_t washout = 12, window = 6;
        for (std::size_t t = 0; t < kStepsPerDay; ++t) {
            if (excursion[t]) continue;
            if (t < washout) continue;
            if ((t > 0 && excursion[t - 1]) || (t + 1 < kStepsPerDay && excursion[t + 1])) continue;
            bool quiet = true;
            for (std::size_t u = t >= washout + window ? t - washout - window : 0; u <= t; ++u)
                if (has_event(ep, u)) quiet = false;
            if (quiet) labels[t] = SampleRegime::stationary;
        }
        out.episodes.push_back(std::move(ep));
        out.labels.push_back(std::move(labels));
    }
    return out;
}

/// Missingness process used to inject realistic gaps into synthetic traces.
inline MissingnessModel reference_missingness_model() {
    MissingnessModel m;
    for (int h = 0; h < 24; ++h) m.onset_prob[static_cast<std::size_t>(h)] = h < 6 ? 0.25 : 0.15;
    m.onset_prob[8] = 0.2;
    m.onset_prob[20] = 0.2;
    m.day.pi_short = 0.5;
    m.day.mixture = {.A = 0.02, .k = 0.05, .B = 0.01, .mu = 120.0, .sigma = 15.0, .gamma = 0.0005};
    m.day.mixture.normalize_weights();
    m.night.pi_short = 0.4;
    m.night.mixture = {.A = 0.04, .k = 0.08, .B = 0.002, .mu = 60.0, .sigma = 20.0, .gamma = 0.0002};
    m.night.mixture.normalize_weights();
    return m;
}

inline void write_labels_csv(std::ostream& out, const SynthData& data) {
    out << "episode_id,t,regime\n";
    for (std::size_t e = 0; e < data.episodes.size(); ++e)
        for (std::size_t t = 0; t < data.labels[e].size(); ++t)
            out << data.episodes[e].episode_id << ',' << t << ',' << to_string(data.labels[e][t]) << '\n';
}

}  // namespace regime_bench
