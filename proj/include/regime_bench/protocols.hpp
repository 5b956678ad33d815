#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "csv.hpp"
#include "error.hpp"
#include "rng.hpp"
#include "types.hpp"

namespace regime_bench {

enum class Protocol { A, B, C };

inline constexpr char to_char(Protocol p) noexcept {
    return p == Protocol::A ? 'A' : p == Protocol::B ? 'B' : 'C';
}

inline Protocol protocol_from_string(std::string_view s) {
    if (s == "A") return Protocol::A;
    if (s == "B") return Protocol::B;
    if (s == "C") return Protocol::C;
    throw ConfigError("unknown protocol '" + std::string(s) + "' (expected A, B or C)");
}

inline constexpr Provenance provenance_of(Protocol p) noexcept {
    return p == Protocol::A ? Provenance::protocol_A
         : p == Protocol::B ? Provenance::protocol_B
                            : Provenance::protocol_C;
}

/// Homeostasis thresholds used by Protocol A and by the router.
struct StabilityCriteria {
    double glucose_low = 70.0;         // inclusive, mg/dL
    double glucose_high = 140.0;       // inclusive, mg/dL
    double gradient_threshold = 0.6;   // strict, mg/dL/min
    double gradient_quorum = 0.85;
    int washout_minutes = 60;
    double max_range = 25.0;           // strict, mg/dL
    int window_minutes = 30;

    std::size_t window_samples() const { return static_cast<std::size_t>(window_minutes / kStepMinutes); }
    std::size_t washout_samples() const { return static_cast<std::size_t>(washout_minutes / kStepMinutes); }
};

struct MealEvent {
    std::size_t index = 0;
    double carbs = 0.0;
};

struct RegimeWindow {
    Protocol protocol = Protocol::A;
    std::string patient_id;
    int episode_id = 0;
    std::size_t start_index = 0;
    std::size_t end_index = 0;  // exclusive
    std::optional<std::size_t> anchor_index;
    std::optional<MealEvent> meal_event;
    /// Samples actually masked from start_index (partial Protocol-A segment).
    std::size_t masked_length = 0;

    std::size_t length() const noexcept { return end_index - start_index; }
};

/// mg/dL/min: central differences inside, one-sided at the ends.
inline std::vector<double> gradient(std::span<const double> g) {
    if (g.size() < 2) throw DimensionError("gradient needs at least 2 samples");
    const std::size_t n = g.size();
    std::vector<double> out(n);
    out[0] = (g[1] - g[0]) / kStepMinutes;
    out[n - 1] = (g[n - 1] - g[n - 2]) / kStepMinutes;
    for (std::size_t t = 1; t + 1 < n; ++t) out[t] = (g[t + 1] - g[t - 1]) / (2.0 * kStepMinutes);
    return out;
}

inline std::vector<double> gradient(const Episode& ep) { return gradient(ep.dense_glucose()); }

/// Gradient over each contiguous observed run; empty where a run has a single sample.
inline std::vector<std::optional<double>> observed_gradient(const Episode& ep) {
    std::vector<std::optional<double>> out(ep.size());
    for (const auto& run : runs_of(ep.observed_flags(), 1)) {
        if (run.length < 2) continue;
        std::vector<double> g(run.length);
        for (std::size_t i = 0; i < run.length; ++i) g[i] = *ep.glucose[run.start + i];
        const auto d = gradient(g);
        for (std::size_t i = 0; i < run.length; ++i) out[run.start + i] = d[i];
    }
    return out;
}

inline bool has_event(const Episode& ep, std::size_t t) {
    return ep.exog_at(t, Exog::carbs) > 0.0 || ep.exog_at(t, Exog::bolus) > 0.0;
}

namespace detail {

inline bool window_is_stable(const Episode& ep, const std::vector<std::optional<double>>& grad,
                             std::size_t s, const StabilityCriteria& c) {
    const std::size_t w = c.window_samples();
    const std::size_t washout = c.washout_samples();
    if (s < washout || s + w > ep.size()) return false;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    std::size_t calm = 0;
    for (std::size_t t = s; t < s + w; ++t) {
        if (!ep.glucose[t] || !grad[t]) return false;
        const double g = *ep.glucose[t];
        if (g < c.glucose_low || g > c.glucose_high) return false;
        if (has_event(ep, t)) return false;
        lo = std::min(lo, g);
        hi = std::max(hi, g);
        calm += std::abs(*grad[t]) < c.gradient_threshold;
    }
    if (static_cast<double>(calm) < c.gradient_quorum * static_cast<double>(w)) return false;
    if (!(hi - lo < c.max_range)) return false;
    for (std::size_t t = s - washout; t < s; ++t)
        if (has_event(ep, t)) return false;
    return true;
}

}  // namespace detail

/// Every 30-minute window satisfying the five homeostasis criteria. Windows
/// overlap; the washout must lie inside the episode.
inline std::vector<RegimeWindow> find_stable_windows(const Episode& ep, const StabilityCriteria& c = {}) {
    std::vector<RegimeWindow> out;
    const std::size_t w = c.window_samples();
    if (ep.size() < w || ep.size() < 2) return out;
    const auto grad = observed_gradient(ep);
    for (std::size_t s = 0; s + w <= ep.size(); ++s) {
        if (!detail::window_is_stable(ep, grad, s, c)) continue;
        RegimeWindow rw;
        rw.protocol = Protocol::A;
        rw.patient_id = ep.patient_id;
        rw.episode_id = ep.episode_id;
        rw.start_index = s;
        rw.end_index = s + w;
        rw.masked_length = w;
        out.push_back(rw);
    }
    return out;
}

struct ProtocolMasks {
    Mask mask;
    std::vector<RegimeWindow> windows;
};

inline std::size_t round_half_up(double x) { return static_cast<std::size_t>(std::floor(x + 0.5)); }

/// Greedy maximum packing of non-overlapping windows (earliest end first).
inline std::vector<std::size_t> max_disjoint_windows(const std::vector<RegimeWindow>& windows) {
    std::vector<std::size_t> order(windows.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) {
        return windows[a].end_index < windows[b].end_index ||
               (windows[a].end_index == windows[b].end_index && windows[a].start_index < windows[b].start_index);
    });
    std::vector<std::size_t> chosen;
    std::size_t frontier = 0;
    bool any = false;
    for (auto i : order) {
        if (any && windows[i].start_index < frontier) continue;
        chosen.push_back(i);
        frontier = windows[i].end_index;
        any = true;
    }
    return chosen;
}

/// Protocol A: masks round-half-up(ratio * T) samples using full stable
/// windows chosen at random, plus a partial window for the remainder.
inline ProtocolMasks allocate_stationary_mask(const Episode& ep, const std::vector<RegimeWindow>& windows,
                                              double ratio, std::uint64_t seed,
                                              const StabilityCriteria& c = {}) {
    if (!(ratio >= 0.0 && ratio <= 1.0)) throw ConfigError("masking ratio must lie in [0, 1]");
    const std::size_t w = c.window_samples();
    const std::size_t target = round_half_up(ratio * static_cast<double>(ep.size()));
    const std::size_t full = target / w;
    const std::size_t residual = target % w;
    const std::size_t needed = full + (residual > 0 ? 1 : 0);

    ProtocolMasks out;
    out.mask = Mask::all_retained(ep.size());
    out.mask.seed = seed;
    out.mask.provenance = Provenance::protocol_A;
    if (needed == 0) return out;

    const auto packing = max_disjoint_windows(windows);
    if (packing.size() < needed) {
        const double max_ratio = static_cast<double>(packing.size() * w) / static_cast<double>(ep.size());
        throw AllocationError("insufficient stable coverage in " + ep.patient_id + "/" +
                                  std::to_string(ep.episode_id) + " for ratio " + csv::format_double(ratio),
                              max_ratio);
    }

    auto overlaps = [&](const std::vector<std::size_t>& chosen, std::size_t i) {
        for (auto j : chosen)
            if (windows[i].start_index < windows[j].end_index && windows[j].start_index < windows[i].end_index)
                return true;
        return false;
    };

    Rng rng(seed);
    std::vector<std::size_t> chosen;
    for (int attempt = 0; attempt < 64 && chosen.size() < needed; ++attempt) {
        std::vector<std::size_t> order(windows.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        rng.shuffle(order.begin(), order.end());
        chosen.clear();
        for (auto i : order) {
            if (chosen.size() == needed) break;
            if (!overlaps(chosen, i)) chosen.push_back(i);
        }
    }
    if (chosen.size() < needed) {
        chosen = packing;
        rng.shuffle(chosen.begin(), chosen.end());
        chosen.resize(needed);
    }

    for (std::size_t k = 0; k < chosen.size(); ++k) {
        RegimeWindow rw = windows[chosen[k]];
        rw.masked_length = (k < full) ? rw.length() : residual;
        for (std::size_t t = rw.start_index; t < rw.start_index + rw.masked_length; ++t) out.mask.bits[t] = 0;
        out.windows.push_back(rw);
    }
    std::sort(out.windows.begin(), out.windows.end(),
              [](const auto& a, const auto& b) { return a.start_index < b.start_index; });
    return out;
}

/// Carb events closer than one hour to the previous one are merged into it.
inline std::vector<MealEvent> aggregate_meals(const Episode& ep, int merge_minutes = 60) {
    std::vector<MealEvent> out;
    std::optional<std::size_t> last;
    const auto merge = static_cast<std::size_t>(merge_minutes / kStepMinutes);
    for (std::size_t t = 0; t < ep.size(); ++t) {
        const double carbs = ep.exog_at(t, Exog::carbs);
        if (!(carbs > 0.0)) continue;
        if (last && t - *last < merge && !out.empty())
            out.back().carbs += carbs;
        else
            out.push_back({t, carbs});
        last = t;
    }
    return out;
}

struct PeakOptions {
    int search_minutes = 240;   // post-prandial scan
    int min_minutes = 210;
    int max_minutes = 240;
};

/// Protocol B: for the first n eligible meal events, a 3.5-4 h window centred
/// on the post-prandial peak, kept after the meal and before the day end.
inline ProtocolMasks build_peak_masks(const Episode& ep, int n_peaks, std::uint64_t seed,
                                      const PeakOptions& opt = {}) {
    if (n_peaks < 1) throw ConfigError("n_peaks must be at least 1");
    const auto glucose = ep.dense_glucose();
    const auto search = static_cast<std::size_t>(opt.search_minutes / kStepMinutes);
    const auto min_len = static_cast<std::size_t>(opt.min_minutes / kStepMinutes);
    Rng rng(seed);

    ProtocolMasks out;
    out.mask = Mask::all_retained(ep.size());
    out.mask.seed = seed;
    out.mask.provenance = Provenance::protocol_B;

    for (const auto& meal : aggregate_meals(ep)) {
        if (out.windows.size() == static_cast<std::size_t>(n_peaks)) break;
        if (meal.index + search >= ep.size()) continue;

        std::size_t peak = meal.index + 1;
        for (std::size_t t = meal.index + 1; t <= meal.index + search; ++t)
            if (glucose[t] > glucose[peak]) peak = t;

        const double minutes =
            std::round(rng.uniform(opt.min_minutes, opt.max_minutes) / kStepMinutes) * kStepMinutes;
        const auto len = static_cast<std::size_t>(minutes) / kStepMinutes;
        const std::size_t day_end = meal.index + static_cast<std::size_t>(kStepsPerDay - ep.step_of_day(meal.index));
        const std::size_t limit = std::min(ep.size(), day_end);

        std::size_t start = peak >= len / 2 ? peak - len / 2 : 0;
        if (start <= meal.index) start = meal.index + 1;
        std::size_t end = start + len;
        if (end > limit) {
            start = std::max(meal.index + 1, limit >= len ? limit - len : 0);
            end = std::min(start + len, limit);
        }
        if (end <= start || end - start < min_len) continue;

        RegimeWindow rw;
        rw.protocol = Protocol::B;
        rw.patient_id = ep.patient_id;
        rw.episode_id = ep.episode_id;
        rw.start_index = start;
        rw.end_index = end;
        rw.anchor_index = peak;
        rw.meal_event = meal;
        rw.masked_length = end - start;
        for (std::size_t t = start; t < end; ++t) out.mask.bits[t] = 0;
        out.windows.push_back(rw);
    }
    if (out.windows.size() < static_cast<std::size_t>(n_peaks))
        throw SelectionError(ep.patient_id + "/" + std::to_string(ep.episode_id) + " has " +
                             std::to_string(out.windows.size()) + " eligible post-prandial peaks, " +
                             std::to_string(n_peaks) + " requested");
    return out;
}

/// Half-open grid-index interval of a Temporal Control Reset.
struct TcrInterval {
    std::string patient_id;
    int episode_id = 0;
    std::size_t start_index = 0;
    std::size_t end_index = 0;
};

/// Protocol C: a window centred on the first sample below 70 mg/dL inside
/// each TCR interval, clipped to the episode.
inline ProtocolMasks build_hypo_masks(const Episode& ep, const std::vector<TcrInterval>& tcr,
                                      int window_minutes = 60, double hypo_threshold = 70.0) {
    if (window_minutes < kStepMinutes) throw ConfigError("hypoglycemia window must be at least 5 minutes");
    const auto glucose = ep.dense_glucose();
    const auto len = static_cast<std::size_t>(window_minutes / kStepMinutes);

    ProtocolMasks out;
    out.mask = Mask::all_retained(ep.size());
    out.mask.provenance = Provenance::protocol_C;
    for (const auto& iv : tcr) {
        if (iv.patient_id != ep.patient_id || iv.episode_id != ep.episode_id) continue;
        std::optional<std::size_t> anchor;
        for (std::size_t t = iv.start_index; t < std::min(iv.end_index, ep.size()); ++t)
            if (glucose[t] < hypo_threshold) {
                anchor = t;
                break;
            }
        if (!anchor) continue;
        const std::size_t start = *anchor >= len / 2 ? *anchor - len / 2 : 0;
        const std::size_t end = std::min(*anchor + (len - len / 2), ep.size());
        RegimeWindow rw;
        rw.protocol = Protocol::C;
        rw.patient_id = ep.patient_id;
        rw.episode_id = ep.episode_id;
        rw.start_index = start;
        rw.end_index = end;
        rw.anchor_index = anchor;
        rw.masked_length = end - start;
        for (std::size_t t = start; t < end; ++t) out.mask.bits[t] = 0;
        out.windows.push_back(rw);
    }
    return out;
}

}  // namespace regime_bench
