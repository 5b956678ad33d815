#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "missingness.hpp"
#include "rng.hpp"
#include "types.hpp"

namespace regime_bench {

/// Draws a sustained-gap duration (minutes, multiple of 5 in [10, 240]).
inline int sample_duration(const MissingnessModel& model, Regime regime, Rng& rng) {
    const auto& mix = model.regime(regime).mixture;
    const double u = rng.uniform();
    double d;
    if (u < mix.w_exp) {
        d = truncated_exponential(rng, mix.k, kDurationMin, kDurationMax);
    } else if (u < mix.w_exp + mix.w_gauss) {
        d = truncated_normal(rng, mix.mu, mix.sigma, kDurationMin, kDurationMax);
    } else {
        d = rng.uniform(kDurationMin, kDurationMax);
    }
    d = std::round(d / kStepMinutes) * kStepMinutes;
    return static_cast<int>(std::clamp(d, kDurationMin, kDurationMax));
}

/// One onset drawn by the generator.
struct MaskEvent {
    int hour = 0;
    std::size_t start_index = 0;
    std::size_t length = 0;  // samples
    int duration = 0;        // minutes, before clipping at T
    bool short_gap = false;
};

/// Per-hour Bernoulli bookkeeping, used by the statistical checks.
struct MaskTrace {
    std::array<std::uint64_t, 24> trials{};
    std::array<std::uint64_t, 24> onsets{};
    std::vector<MaskEvent> events;
};

/// Hour-walk generator: each hour gets a Bernoulli onset trial; an onset
/// places one gap at a uniform index inside the hour and the walk resumes
/// after the gap or at the next hour boundary, whichever is later.
inline Mask generate_mask(std::size_t T, int start_time_of_day, const MissingnessModel& model,
                          std::uint64_t seed, MaskTrace* trace = nullptr) {
    Mask mask = Mask::all_retained(T);
    mask.seed = seed;
    mask.provenance = Provenance::empirical;
    Rng rng(seed);
    const std::size_t offset = static_cast<std::size_t>(floor_mod(start_time_of_day, kMinutesPerDay)) / kStepMinutes;

    std::size_t t = 0;
    while (t < T) {
        const std::size_t step = (offset + t) % kStepsPerDay;
        const int hour = static_cast<int>(step / kStepsPerHour);
        const std::size_t t_next = t + (kStepsPerHour - step % kStepsPerHour);
        if (trace) ++trace->trials[static_cast<std::size_t>(hour)];
        if (!rng.bernoulli(model.onset_prob[static_cast<std::size_t>(hour)])) {
            t = t_next;
            continue;
        }
        const Regime regime = regime_of_hour(hour);
        const bool is_short = rng.uniform() < model.regime(regime).pi_short;
        const int duration = is_short ? kStepMinutes : sample_duration(model, regime, rng);
        const auto length = static_cast<std::size_t>((duration + kStepMinutes - 1) / kStepMinutes);
        const std::size_t span = std::min(t_next, T) - t;
        const std::size_t start = t + static_cast<std::size_t>(rng.below(span));
        const std::size_t stop = std::min(start + length, T);
        std::fill(mask.bits.begin() + static_cast<std::ptrdiff_t>(start),
                  mask.bits.begin() + static_cast<std::ptrdiff_t>(stop), std::uint8_t{0});
        if (trace) {
            ++trace->onsets[static_cast<std::size_t>(hour)];
            trace->events.push_back({hour, start, length, duration, is_short});
        }
        // An hour gets one trial; a gap running past the hour boundary
        // resumes the walk mid-hour in the later hour.
        t = std::max(start + length, t_next);
    }
    return mask;
}

/// Empirical mask for an episode with a per-episode stream derived from the master seed.
inline Mask generate_mask(const Episode& ep, const MissingnessModel& model, std::uint64_t master_seed) {
    return generate_mask(ep.size(), ep.start_time_of_day(), model,
                         derive_seed(master_seed, ep.patient_id, ep.episode_id));
}

/// Copy of the episode with glucose hidden where the mask is 0.
inline Episode apply_mask(const Episode& ep, const Mask& mask) {
    check_same_length(ep, mask);
    Episode out = ep;
    for (std::size_t t = 0; t < ep.size(); ++t)
        if (!mask.retained(t)) out.glucose[t].reset();
    return out;
}

}  // namespace regime_bench
