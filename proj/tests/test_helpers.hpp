#pragma once

#include <optional>
#include <string>
#include <vector>

#include <regime_bench/types.hpp>

namespace testing_helpers {

/// Episode from values; NaN marks a missing sample.
inline regime_bench::Episode make_episode(const std::vector<double>& g, std::int64_t start_minute = 0,
                                          std::string patient = "p1", int episode_id = 0) {
    regime_bench::Episode ep;
    ep.patient_id = std::move(patient);
    ep.episode_id = episode_id;
    ep.start_minute = start_minute;
    for (double v : g) ep.glucose.push_back(v == v ? std::optional<double>(v) : std::nullopt);
    ep.exog.assign(g.size(), {0.0, 0.0, 0.0});
    return ep;
}

inline regime_bench::Mask make_mask(const std::vector<int>& bits) {
    regime_bench::Mask m;
    for (int b : bits) m.bits.push_back(static_cast<std::uint8_t>(b));
    return m;
}

inline constexpr double NA = std::numeric_limits<double>::quiet_NaN();

}  // namespace testing_helpers
