#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "csv.hpp"
#include "error.hpp"
#include "types.hpp"

namespace regime_bench {

inline constexpr double kGlucoseMin = 20.0;
inline constexpr double kGlucoseMax = 500.0;

struct IngestOptions {
    /// A new episode starts when consecutive glucose observations are more
    /// than this many minutes apart (240 raw, 30 processed).
    int partition_gap_minutes = 30;
    /// Also break episodes at local midnight.
    bool split_days = false;
};

/// Integer minutes, or ISO-8601 `YYYY-MM-DD[T ]HH:MM[:SS[.f]]` taken as local time.
inline std::int64_t parse_timestamp(std::string_view raw, std::size_t line) {
    const auto s = csv::trim(raw);
    if (s.empty()) throw ParseError(line, "empty timestamp");
    const bool integral = std::all_of(s.begin() + (s[0] == '-' ? 1 : 0), s.end(),
                                      [](char c) { return c >= '0' && c <= '9'; });
    if (integral) return csv::parse_int(s, line, "timestamp");

    auto bad = [&] { return ParseError(line, "invalid timestamp '" + std::string(s) + "'"); };
    auto num = [&](std::size_t pos, std::size_t len) -> int {
        if (pos + len > s.size()) throw bad();
        int v = 0;
        for (std::size_t i = pos; i < pos + len; ++i) {
            if (s[i] < '0' || s[i] > '9') throw bad();
            v = v * 10 + (s[i] - '0');
        }
        return v;
    };
    if (s.size() < 16 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') ||
        s[13] != ':')
        throw bad();
    const int year = num(0, 4), month = num(5, 2), day = num(8, 2);
    const int hour = num(11, 2), minute = num(14, 2);
    int second = 0;
    std::size_t pos = 16;
    if (pos < s.size() && s[pos] == ':') {
        second = num(pos + 1, 2);
        pos += 3;
        if (pos < s.size() && s[pos] == '.') {
            ++pos;
            while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
        }
    }
    if (pos < s.size() && s[pos] == 'Z') ++pos;
    if (pos != s.size()) throw bad();

    const std::chrono::year_month_day ymd{std::chrono::year{year},
                                          std::chrono::month{static_cast<unsigned>(month)},
                                          std::chrono::day{static_cast<unsigned>(day)}};
    if (!ymd.ok() || hour > 23 || minute > 59 || second > 60) throw bad();
    const auto days = std::chrono::sys_days{ymd}.time_since_epoch().count();
    return static_cast<std::int64_t>(days) * kMinutesPerDay + hour * 60 + minute + (second >= 30);
}

/// Nearest 5-minute grid point.
inline constexpr std::int64_t snap_to_grid(std::int64_t minute) {
    return floor_div(minute + 2, kStepMinutes) * kStepMinutes;
}

namespace detail {

struct GridPoint {
    std::optional<double> glucose;
    double carbs = 0.0;
    double bolus = 0.0;
    double basal = 0.0;
};

inline std::vector<Episode> partition_patient(const std::string& patient,
                                              const std::map<std::int64_t, GridPoint>& grid,
                                              const IngestOptions& opt) {
    std::vector<std::int64_t> obs;
    for (const auto& [t, p] : grid)
        if (p.glucose) obs.push_back(t);

    std::vector<Episode> out;
    std::size_t i = 0;
    while (i < obs.size()) {
        std::size_t j = i;
        while (j + 1 < obs.size()) {
            const auto gap = obs[j + 1] - obs[j];
            if (gap > opt.partition_gap_minutes) break;
            if (opt.split_days &&
                floor_div(obs[j + 1], kMinutesPerDay) != floor_div(obs[j], kMinutesPerDay))
                break;
            ++j;
        }
        Episode ep;
        ep.patient_id = patient;
        ep.episode_id = static_cast<int>(out.size());
        ep.start_minute = obs[i];
        const auto n = static_cast<std::size_t>((obs[j] - obs[i]) / kStepMinutes + 1);
        ep.glucose.assign(n, std::nullopt);
        ep.exog.assign(n, {0.0, 0.0, 0.0});
        for (auto it = grid.lower_bound(obs[i]); it != grid.end() && it->first <= obs[j]; ++it) {
            const auto t = static_cast<std::size_t>((it->first - obs[i]) / kStepMinutes);
            ep.glucose[t] = it->second.glucose;
            ep.exog[t] = {it->second.carbs, it->second.bolus, it->second.basal};
        }
        out.push_back(std::move(ep));
        i = j + 1;
    }
    return out;
}

}  // namespace detail

/// Parses the CGM CSV (`patient_id,timestamp,glucose,carbs,bolus,basal`),
/// snaps rows to the 5-minute grid and partitions each patient's stream into
/// episodes. Output is sorted by patient id, then episode id.
inline std::vector<Episode> ingest_csv(std::istream& in, const IngestOptions& opt = {}) {
    if (opt.partition_gap_minutes <= 0) throw ConfigError("partition gap must be positive");
    const auto table =
        csv::Table::read(in, {"patient_id", "timestamp", "glucose", "carbs", "bolus", "basal"});

    std::map<std::string, std::map<std::int64_t, detail::GridPoint>> grids;
    std::map<std::string, std::int64_t> last_ts;
    for (const auto& row : table.rows()) {
        const auto& pid = table.get(row, "patient_id");
        if (pid.empty()) throw ParseError(row.line, "empty patient_id");
        const auto ts = parse_timestamp(table.get(row, "timestamp"), row.line);
        if (auto it = last_ts.find(pid); it != last_ts.end() && ts < it->second)
            throw OrderingError("line " + std::to_string(row.line) + ": timestamp goes backwards for patient '" +
                                pid + "'");
        last_ts[pid] = ts;

        const auto g = csv::parse_optional_double(table.get(row, "glucose"), row.line, "glucose");
        if (g && (!(*g >= kGlucoseMin) || *g > kGlucoseMax))
            throw ParseError(row.line, "glucose " + csv::format_double(*g) + " outside [20, 500]");
        auto channel = [&](const char* name) {
            const auto v = csv::parse_optional_double(table.get(row, name), row.line, name).value_or(0.0);
            if (!(v >= 0.0) || !std::isfinite(v)) throw ParseError(row.line, std::string(name) + " must be >= 0");
            return v;
        };
        const double carbs = channel("carbs");
        const double bolus = channel("bolus");
        const double basal = channel("basal");

        auto& p = grids[pid][snap_to_grid(ts)];
        if (g) p.glucose = g;  // later reading wins
        p.carbs += carbs;
        p.bolus += bolus;
        if (!csv::trim(table.get(row, "basal")).empty()) p.basal = basal;
    }

    std::vector<Episode> out;
    for (const auto& [pid, grid] : grids) {
        auto eps = detail::partition_patient(pid, grid, opt);
        out.insert(out.end(), std::make_move_iterator(eps.begin()), std::make_move_iterator(eps.end()));
    }
    return out;
}

inline std::vector<Episode> ingest_csv(const std::filesystem::path& path, const IngestOptions& opt = {}) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    return ingest_csv(in, opt);
}

/// Writes episodes back out as CGM CSV with integer-minute timestamps.
inline void write_cgm_csv(std::ostream& out, const std::vector<Episode>& episodes) {
    out << "patient_id,timestamp,glucose,carbs,bolus,basal\n";
    for (const auto& ep : episodes) {
        for (std::size_t t = 0; t < ep.size(); ++t) {
            out << csv::quote(ep.patient_id) << ',' << ep.start_minute + static_cast<std::int64_t>(t) * kStepMinutes
                << ',' << (ep.glucose[t] ? csv::format_double(*ep.glucose[t]) : std::string()) << ','
                << csv::format_double(ep.exog[t][0]) << ',' << csv::format_double(ep.exog[t][1]) << ','
                << csv::format_double(ep.exog[t][2]) << '\n';
        }
    }
}

/// Interior gaps linearly interpolated, leading/trailing missing samples trimmed.
inline Episode linear_fill(const Episode& ep) {
    std::vector<std::size_t> obs;
    for (std::size_t t = 0; t < ep.size(); ++t)
        if (ep.observed(t)) obs.push_back(t);
    if (obs.empty())
        throw EmptyEpisodeError("episode " + ep.patient_id + "/" + std::to_string(ep.episode_id) +
                                " has no observations");

    const std::size_t first = obs.front(), last = obs.back();
    Episode out;
    out.patient_id = ep.patient_id;
    out.episode_id = ep.episode_id;
    out.start_minute = ep.start_minute + static_cast<std::int64_t>(first) * kStepMinutes;
    out.glucose.assign(ep.glucose.begin() + first, ep.glucose.begin() + last + 1);
    out.exog.assign(ep.exog.begin() + first, ep.exog.begin() + last + 1);

    for (std::size_t k = 0; k + 1 < obs.size(); ++k) {
        const std::size_t a = obs[k], b = obs[k + 1];
        if (b - a < 2) continue;
        const double ga = *ep.glucose[a], gb = *ep.glucose[b];
        const double n = static_cast<double>(b - a);
        for (std::size_t t = a + 1; t < b; ++t)
            out.glucose[t - first] = ga + ((gb - ga) * static_cast<double>(t - a)) / n;
    }
    return out;
}

struct TimeEncoding {
    double sin_component = 0.0;
    double cos_component = 1.0;
};

/// Time-of-day embedding of grid index t for an episode starting at
/// `start_time_of_day` minutes past midnight. Period is exactly 288 steps.
inline TimeEncoding time_encoding(std::int64_t t, int start_time_of_day = 0) {
    const auto step = floor_mod(start_time_of_day / kStepMinutes + t, kStepsPerDay);
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(step) / kStepsPerDay;
    return {std::sin(angle), std::cos(angle)};
}

struct InputVector {
    double masked_glucose = 0.0;
    std::array<double, 3> exog{};
    TimeEncoding encoding;
};

/// Model input rows: masked glucose (zero where masked), exogenous channels,
/// time encoding.
inline std::vector<InputVector> build_inputs(const Episode& ep, const Mask& mask) {
    check_same_length(ep, mask);
    std::vector<InputVector> out(ep.size());
    const int sod = ep.start_time_of_day();
    for (std::size_t t = 0; t < ep.size(); ++t) {
        auto& x = out[t];
        if (mask.retained(t)) {
            if (!ep.glucose[t])
                throw DimensionError("glucose missing at retained index " + std::to_string(t) + " of " +
                                     ep.patient_id + "/" + std::to_string(ep.episode_id));
            x.masked_glucose = *ep.glucose[t];
        }
        x.exog = ep.exog[t];
        x.encoding = time_encoding(static_cast<std::int64_t>(t), sod);
    }
    return out;
}

inline void write_inputs_csv(std::ostream& out, const std::vector<InputVector>& inputs) {
    out << "t,masked_glucose,carbs,bolus,basal,sin_t,cos_t\n";
    for (std::size_t t = 0; t < inputs.size(); ++t) {
        const auto& x = inputs[t];
        out << t << ',' << csv::format_double(x.masked_glucose) << ',' << csv::format_double(x.exog[0]) << ','
            << csv::format_double(x.exog[1]) << ',' << csv::format_double(x.exog[2]) << ','
            << csv::format_double(x.encoding.sin_component) << ','
            << csv::format_double(x.encoding.cos_component) << '\n';
    }
}

}  // namespace regime_bench
