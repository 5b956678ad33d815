#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "csv.hpp"
#include "error.hpp"
#include "types.hpp"

namespace regime_bench {

struct Imputation {
    std::string patient_id;
    int episode_id = 0;
    std::string method;
    std::vector<double> values;
};

namespace detail {

inline std::vector<std::size_t> retained_indices(const Episode& ep, const Mask& mask) {
    check_same_length(ep, mask);
    std::vector<std::size_t> out;
    for (std::size_t t = 0; t < ep.size(); ++t)
        if (mask.retained(t) && ep.observed(t)) out.push_back(t);
    return out;
}

inline Imputation start(const Episode& ep, std::string method) {
    Imputation imp;
    imp.patient_id = ep.patient_id;
    imp.episode_id = ep.episode_id;
    imp.method = std::move(method);
    imp.values.assign(ep.size(), 0.0);
    return imp;
}

inline std::vector<std::size_t> require_retained(const Episode& ep, const Mask& mask) {
    auto kept = retained_indices(ep, mask);
    if (kept.empty())
        throw EmptyEpisodeError("no retained observations in " + ep.patient_id + "/" +
                                std::to_string(ep.episode_id));
    return kept;
}

inline Imputation constant_fill(const Episode& ep, const Mask& mask, std::string method, double fill) {
    auto imp = start(ep, std::move(method));
    for (std::size_t t = 0; t < ep.size(); ++t)
        imp.values[t] = (mask.retained(t) && ep.observed(t)) ? *ep.glucose[t] : fill;
    return imp;
}

}  // namespace detail

inline Imputation impute_mean(const Episode& ep, const Mask& mask) {
    const auto kept = detail::require_retained(ep, mask);
    double sum = 0.0;
    for (auto t : kept) sum += *ep.glucose[t];
    return detail::constant_fill(ep, mask, "Mean", sum / static_cast<double>(kept.size()));
}

inline Imputation impute_median(const Episode& ep, const Mask& mask) {
    const auto kept = detail::require_retained(ep, mask);
    std::vector<double> v;
    v.reserve(kept.size());
    for (auto t : kept) v.push_back(*ep.glucose[t]);
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    const double median = (n % 2) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    return detail::constant_fill(ep, mask, "Median", median);
}

/// Last observation carried forward; a leading gap takes the next observation.
inline Imputation impute_locf(const Episode& ep, const Mask& mask) {
    const auto kept = detail::require_retained(ep, mask);
    auto imp = detail::start(ep, "LOCF");
    double carry = *ep.glucose[kept.front()];
    for (std::size_t t = 0; t < ep.size(); ++t) {
        if (mask.retained(t) && ep.observed(t)) carry = *ep.glucose[t];
        imp.values[t] = carry;
    }
    return imp;
}

/// Chord between bracketing retained observations; nearest value at the edges.
inline Imputation impute_lerp(const Episode& ep, const Mask& mask) {
    const auto kept = detail::require_retained(ep, mask);
    auto imp = detail::start(ep, "Lerp");
    const double first = *ep.glucose[kept.front()];
    const double last = *ep.glucose[kept.back()];
    for (std::size_t t = 0; t < kept.front(); ++t) imp.values[t] = first;
    for (std::size_t t = kept.back() + 1; t < ep.size(); ++t) imp.values[t] = last;
    for (std::size_t k = 0; k < kept.size(); ++k) {
        const std::size_t a = kept[k];
        imp.values[a] = *ep.glucose[a];
        if (k + 1 == kept.size()) break;
        const std::size_t b = kept[k + 1];
        const double ga = *ep.glucose[a], gb = *ep.glucose[b];
        const double n = static_cast<double>(b - a);
        for (std::size_t t = a + 1; t < b; ++t) imp.values[t] = ga + ((gb - ga) * static_cast<double>(t - a)) / n;
    }
    return imp;
}

inline const std::vector<std::string>& builtin_methods() {
    static const std::vector<std::string> names = {"mean", "median", "locf", "lerp"};
    return names;
}

inline Imputation impute(std::string_view method, const Episode& ep, const Mask& mask) {
    if (method == "mean") return impute_mean(ep, mask);
    if (method == "median") return impute_median(ep, mask);
    if (method == "locf") return impute_locf(ep, mask);
    if (method == "lerp") return impute_lerp(ep, mask);
    throw ConfigError("unknown imputation method '" + std::string(method) + "'");
}

inline constexpr double kEchoTolerance = 1e-6;

/// Reads `patient_id,episode_id,t,value,method` rows and checks that every
/// method covers every episode at every index and echoes retained values.
inline std::vector<Imputation> load_external(std::istream& in, const std::vector<Episode>& episodes,
                                             const std::vector<Mask>& masks) {
    if (episodes.size() != masks.size()) throw DimensionError("episode and mask counts differ");
    const auto table = csv::Table::read(in, {"patient_id", "episode_id", "t", "value", "method"});

    std::map<std::pair<std::string, int>, std::size_t> index;
    for (std::size_t i = 0; i < episodes.size(); ++i) {
        check_same_length(episodes[i], masks[i]);
        index[{episodes[i].patient_id, episodes[i].episode_id}] = i;
    }

    using Key = std::pair<std::string, std::size_t>;  // method, episode slot
    std::map<Key, std::vector<std::optional<double>>> series;
    std::vector<std::string> methods;
    for (const auto& row : table.rows()) {
        const auto& pid = table.get(row, "patient_id");
        const auto eid = static_cast<int>(csv::parse_int(table.get(row, "episode_id"), row.line, "episode_id"));
        const auto t = csv::parse_int(table.get(row, "t"), row.line, "t");
        const double v = csv::parse_double(table.get(row, "value"), row.line, "value");
        const auto& method = table.get(row, "method");
        if (method.empty()) throw ParseError(row.line, "empty method");
        auto it = index.find({pid, eid});
        if (it == index.end())
            throw CoverageError("line " + std::to_string(row.line) + ": unknown episode " + pid + "/" +
                                std::to_string(eid));
        const auto& ep = episodes[it->second];
        if (t < 0 || static_cast<std::size_t>(t) >= ep.size())
            throw ParseError(row.line, "t out of range for episode " + pid + "/" + std::to_string(eid));
        if (!std::isfinite(v)) throw ParseError(row.line, "non-finite value");
        if (std::find(methods.begin(), methods.end(), method) == methods.end()) methods.push_back(method);
        auto& s = series[{method, it->second}];
        if (s.empty()) s.assign(ep.size(), std::nullopt);
        s[static_cast<std::size_t>(t)] = v;
    }

    std::vector<Imputation> out;
    for (const auto& method : methods) {
        std::vector<std::string> missing;
        for (std::size_t i = 0; i < episodes.size(); ++i) {
            auto it = series.find({method, i});
            const bool complete = it != series.end() &&
                                  std::all_of(it->second.begin(), it->second.end(), [](auto& v) { return v.has_value(); });
            if (!complete) missing.push_back(episodes[i].patient_id + "/" + std::to_string(episodes[i].episode_id));
        }
        if (!missing.empty()) {
            std::string list;
            for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
            throw CoverageError("method '" + method + "' does not cover episode(s): " + list);
        }
        for (std::size_t i = 0; i < episodes.size(); ++i) {
            const auto& ep = episodes[i];
            const auto& s = series.at({method, i});
            Imputation imp;
            imp.patient_id = ep.patient_id;
            imp.episode_id = ep.episode_id;
            imp.method = method;
            imp.values.resize(ep.size());
            for (std::size_t t = 0; t < ep.size(); ++t) {
                imp.values[t] = *s[t];
                if (masks[i].retained(t) && ep.observed(t) &&
                    std::abs(imp.values[t] - *ep.glucose[t]) > kEchoTolerance)
                    throw IntegrityError("method '" + method + "' alters observed value at " + ep.patient_id + "/" +
                                         std::to_string(ep.episode_id) + " t=" + std::to_string(t));
            }
            out.push_back(std::move(imp));
        }
    }
    return out;
}

inline std::vector<Imputation> load_external(const std::string& path, const std::vector<Episode>& episodes,
                                             const std::vector<Mask>& masks) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "'");
    return load_external(in, episodes, masks);
}

inline void write_imputations_csv(std::ostream& out, const std::vector<Imputation>& imps) {
    out << "patient_id,episode_id,t,value,method\n";
    for (const auto& imp : imps)
        for (std::size_t t = 0; t < imp.values.size(); ++t)
            out << csv::quote(imp.patient_id) << ',' << imp.episode_id << ',' << t << ','
                << csv::format_double(imp.values[t]) << ',' << csv::quote(imp.method) << '\n';
}

}  // namespace regime_bench
