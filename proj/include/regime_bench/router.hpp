#pragma once

#include <optional>
#include <string>
#include <vector>

#include "error.hpp"
#include "imputers.hpp"
#include "protocols.hpp"
#include "types.hpp"

namespace regime_bench {

enum class GapLabel { stationary, transient };

inline constexpr std::string_view to_string(GapLabel l) noexcept {
    return l == GapLabel::stationary ? "stationary" : "transient";
}

struct RoutingDecision {
    Run gap;
    GapLabel label = GapLabel::transient;
    double calm_fraction = 0.0;  // context gradients below threshold
    std::size_t n_gradients = 0;
    std::optional<double> left_boundary;
    std::optional<double> right_boundary;
};

/// Labels a gap from the retained context on either side: stationary when
/// enough context gradients are calm and the bracketing observations are
/// euglycemic. No usable context means transient.
inline RoutingDecision classify_gap(const Episode& ep, const Mask& mask, Run gap,
                                    const StabilityCriteria& c = {}, int context_minutes = 30) {
    check_same_length(ep, mask);
    auto retained = [&](std::size_t t) { return mask.retained(t) && ep.observed(t); };
    const auto span = static_cast<std::size_t>(context_minutes / kStepMinutes);

    RoutingDecision d;
    d.gap = gap;

    std::vector<double> left;
    for (std::size_t t = gap.start; t > 0 && left.size() < span && retained(t - 1); --t)
        left.insert(left.begin(), *ep.glucose[t - 1]);
    std::vector<double> right;
    for (std::size_t t = gap.end(); t < ep.size() && right.size() < span && retained(t); ++t)
        right.push_back(*ep.glucose[t]);

    if (!left.empty()) d.left_boundary = left.back();
    if (!right.empty()) d.right_boundary = right.front();

    std::size_t calm = 0;
    for (const auto* side : {&left, &right}) {
        if (side->size() < 2) continue;
        for (double g : gradient(*side)) {
            ++d.n_gradients;
            calm += std::abs(g) < c.gradient_threshold;
        }
    }
    if (d.n_gradients == 0) return d;
    d.calm_fraction = static_cast<double>(calm) / static_cast<double>(d.n_gradients);

    auto euglycemic = [&](const std::optional<double>& v) {
        return !v || (*v >= c.glucose_low && *v <= c.glucose_high);
    };
    if (d.calm_fraction >= c.gradient_quorum && euglycemic(d.left_boundary) && euglycemic(d.right_boundary))
        d.label = GapLabel::stationary;
    return d;
}

struct AdaptiveResult {
    Imputation imputation;
    std::vector<RoutingDecision> decisions;

    double transient_fraction() const {
        if (decisions.empty()) return 0.0;
        std::size_t n = 0;
        for (const auto& d : decisions) n += d.label == GapLabel::transient;
        return static_cast<double>(n) / static_cast<double>(decisions.size());
    }
    double stationary_fraction() const { return decisions.empty() ? 0.0 : 1.0 - transient_fraction(); }
};

/// Splices Lerp into stationary gaps and the external imputation into
/// transient ones. Gaps are maximal runs without a retained observation.
inline AdaptiveResult adaptive_impute(const Episode& ep, const Mask& mask, const Imputation* external,
                                      const StabilityCriteria& c = {}, int context_minutes = 30) {
    check_same_length(ep, mask);
    if (external && external->values.size() != ep.size())
        throw DimensionError("external imputation length mismatch for " + ep.patient_id + "/" +
                             std::to_string(ep.episode_id));

    std::vector<std::uint8_t> kept(ep.size());
    for (std::size_t t = 0; t < ep.size(); ++t) kept[t] = mask.retained(t) && ep.observed(t);

    AdaptiveResult res;
    res.imputation = impute_lerp(ep, mask);
    res.imputation.method = "Adaptive";
    for (const auto& gap : runs_of(kept, 0)) {
        auto d = classify_gap(ep, mask, gap, c, context_minutes);
        if (d.label == GapLabel::transient) {
            if (!external)
                throw RoutingError("transient gap at " + ep.patient_id + "/" + std::to_string(ep.episode_id) +
                                   " [" + std::to_string(gap.start) + ", " + std::to_string(gap.end()) +
                                   ") needs an external imputation");
            for (std::size_t t = gap.start; t < gap.end(); ++t) res.imputation.values[t] = external->values[t];
        }
        res.decisions.push_back(d);
    }
    return res;
}

}  // namespace regime_bench
