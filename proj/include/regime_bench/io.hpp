#pragma once

// JSON and CSV file formats exchanged between CLI stages.

#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "csv.hpp"
#include "error.hpp"
#include "metrics.hpp"
#include "missingness.hpp"
#include "protocols.hpp"
#include "router.hpp"
#include "types.hpp"

namespace regime_bench::io {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

// --- missingness model ------------------------------------------------------

inline json to_json(const RegimeModel& r) {
    const auto& m = r.mixture;
    return json{{"pi_short", r.pi_short}, {"A", m.A},         {"k", m.k},
                {"B", m.B},               {"mu", m.mu},       {"sigma", m.sigma},
                {"gamma", m.gamma},       {"w_exp", m.w_exp}, {"w_gauss", m.w_gauss},
                {"w_unif", m.w_unif}};
}

inline RegimeModel regime_from_json(const json& j) {
    RegimeModel r;
    r.pi_short = j.at("pi_short").get<double>();
    auto& m = r.mixture;
    m.A = j.at("A").get<double>();
    m.k = j.at("k").get<double>();
    m.B = j.at("B").get<double>();
    m.mu = j.at("mu").get<double>();
    m.sigma = j.at("sigma").get<double>();
    m.gamma = j.at("gamma").get<double>();
    m.w_exp = j.at("w_exp").get<double>();
    m.w_gauss = j.at("w_gauss").get<double>();
    m.w_unif = j.at("w_unif").get<double>();
    return r;
}

inline json to_json(const MissingnessModel& m) {
    return json{{"schema_version", kSchemaVersion},
                {"delta_max", m.delta_max},
                {"onset_prob", m.onset_prob},
                {"day", to_json(m.day)},
                {"night", to_json(m.night)}};
}

inline MissingnessModel model_from_json(const json& j) {
    try {
        if (j.at("schema_version").get<int>() != kSchemaVersion)
            throw ConfigError("unsupported model schema version");
        MissingnessModel m;
        const auto onset = j.at("onset_prob").get<std::vector<double>>();
        if (onset.size() != 24) throw ConfigError("model needs 24 onset probabilities");
        for (std::size_t h = 0; h < 24; ++h) {
            if (!(onset[h] >= 0.0 && onset[h] <= 1.0)) throw ConfigError("onset probability outside [0, 1]");
            m.onset_prob[h] = onset[h];
        }
        m.day = regime_from_json(j.at("day"));
        m.night = regime_from_json(j.at("night"));
        m.delta_max = j.value("delta_max", kDurationMax);
        for (const auto* r : {&m.day, &m.night}) {
            const auto& w = r->mixture;
            if (!(r->pi_short >= 0.0 && r->pi_short <= 1.0) || w.w_exp < 0 || w.w_gauss < 0 || w.w_unif < 0 ||
                std::abs(w.w_exp + w.w_gauss + w.w_unif - 1.0) > 1e-9 || !(w.sigma > 0) || !(w.k > 0))
                throw ConfigError("invalid regime parameters in model");
        }
        return m;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed model JSON: ") + e.what());
    }
}

// --- masks ------------------------------------------------------------------

struct MaskRecord {
    std::string patient_id;
    int episode_id = 0;
    Mask mask;
};

inline json to_json(const MaskRecord& r) {
    json gaps = json::array();
    for (const auto& g : masked_runs(r.mask)) gaps.push_back({{"start_index", g.start}, {"length_samples", g.length}});
    return json{{"patient_id", r.patient_id},
                {"episode_id", r.episode_id},
                {"T", r.mask.size()},
                {"seed", r.mask.seed},
                {"provenance", to_string(r.mask.provenance)},
                {"condition", r.mask.condition},
                {"gaps", gaps}};
}

inline json masks_to_json(const std::vector<MaskRecord>& records) {
    json out = json::array();
    for (const auto& r : records) out.push_back(to_json(r));
    return out;
}

inline std::vector<MaskRecord> masks_from_json(const json& j) {
    try {
        std::vector<MaskRecord> out;
        for (const auto& e : j) {
            MaskRecord r;
            r.patient_id = e.at("patient_id").get<std::string>();
            r.episode_id = e.at("episode_id").get<int>();
            const auto T = e.at("T").get<std::size_t>();
            std::vector<Run> gaps;
            for (const auto& g : e.at("gaps")) {
                Run run{g.at("start_index").get<std::size_t>(), g.at("length_samples").get<std::size_t>()};
                if (run.length == 0 || run.end() > T) throw ConfigError("mask gap outside episode bounds");
                gaps.push_back(run);
            }
            r.mask = mask_from_runs(T, gaps);
            r.mask.seed = e.value("seed", std::uint64_t{0});
            r.mask.provenance = provenance_from_string(e.value("provenance", std::string("empirical")));
            r.mask.condition = e.value("condition", std::string());
            out.push_back(std::move(r));
        }
        return out;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed mask JSON: ") + e.what());
    }
}

// --- regime windows ---------------------------------------------------------

inline json to_json(const RegimeWindow& w) {
    json j{{"patient_id", w.patient_id},
           {"episode_id", w.episode_id},
           {"protocol", std::string(1, to_char(w.protocol))},
           {"start_index", w.start_index},
           {"end_index", w.end_index},
           {"masked_length", w.masked_length},
           {"anchor_index", nullptr},
           {"meal_event", nullptr}};
    if (w.anchor_index) j["anchor_index"] = *w.anchor_index;
    if (w.meal_event) j["meal_event"] = {{"index", w.meal_event->index}, {"carbs", w.meal_event->carbs}};
    return j;
}

inline json windows_to_json(const std::vector<RegimeWindow>& ws) {
    json out = json::array();
    for (const auto& w : ws) out.push_back(to_json(w));
    return out;
}

inline std::vector<RegimeWindow> windows_from_json(const json& j) {
    try {
        std::vector<RegimeWindow> out;
        for (const auto& e : j) {
            RegimeWindow w;
            w.patient_id = e.at("patient_id").get<std::string>();
            w.episode_id = e.at("episode_id").get<int>();
            w.protocol = protocol_from_string(e.at("protocol").get<std::string>());
            w.start_index = e.at("start_index").get<std::size_t>();
            w.end_index = e.at("end_index").get<std::size_t>();
            w.masked_length = e.value("masked_length", w.end_index - w.start_index);
            if (e.contains("anchor_index") && !e["anchor_index"].is_null())
                w.anchor_index = e["anchor_index"].get<std::size_t>();
            if (e.contains("meal_event") && !e["meal_event"].is_null())
                w.meal_event = MealEvent{e["meal_event"].at("index").get<std::size_t>(),
                                         e["meal_event"].at("carbs").get<double>()};
            out.push_back(std::move(w));
        }
        return out;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed windows JSON: ") + e.what());
    }
}

// --- TCR metadata -----------------------------------------------------------

inline void write_tcr_csv(std::ostream& out, const std::vector<TcrInterval>& tcr) {
    out << "patient_id,episode_id,tcr_start_index,tcr_end_index\n";
    for (const auto& t : tcr)
        out << csv::quote(t.patient_id) << ',' << t.episode_id << ',' << t.start_index << ',' << t.end_index << '\n';
}

inline std::vector<TcrInterval> read_tcr_csv(std::istream& in) {
    const auto table = csv::Table::read(in, {"patient_id", "episode_id", "tcr_start_index", "tcr_end_index"});
    std::vector<TcrInterval> out;
    for (const auto& row : table.rows()) {
        TcrInterval t;
        t.patient_id = table.get(row, "patient_id");
        t.episode_id = static_cast<int>(csv::parse_int(table.get(row, "episode_id"), row.line, "episode_id"));
        const auto s = csv::parse_int(table.get(row, "tcr_start_index"), row.line, "tcr_start_index");
        const auto e = csv::parse_int(table.get(row, "tcr_end_index"), row.line, "tcr_end_index");
        if (s < 0 || e < s) throw ParseError(row.line, "invalid TCR interval");
        t.start_index = static_cast<std::size_t>(s);
        t.end_index = static_cast<std::size_t>(e);
        out.push_back(std::move(t));
    }
    return out;
}

// --- metric reports ---------------------------------------------------------

inline json to_json(const MetricsReport& m) {
    return json{{"rmse", m.rmse}, {"bias", m.bias},         {"emp_se", m.emp_se}, {"mard", m.mard},
                {"dtw", m.dtw},   {"n_points", m.n_points}, {"n_gaps", m.n_gaps}};
}

inline MetricsReport metrics_from_json(const json& j) {
    MetricsReport m;
    m.rmse = j.at("rmse").get<double>();
    m.bias = j.at("bias").get<double>();
    m.emp_se = j.at("emp_se").get<double>();
    m.mard = j.at("mard").get<double>();
    m.dtw = j.at("dtw").get<double>();
    m.n_points = j.at("n_points").get<std::size_t>();
    m.n_gaps = j.at("n_gaps").get<std::size_t>();
    return m;
}

inline std::string_view rank_name(Rank r) {
    return r == Rank::best ? "best" : r == Rank::second ? "second" : "";
}

inline json report_to_json(const std::vector<EpisodeScore>& scores, const std::vector<TableRow>& table) {
    json eps = json::array();
    for (const auto& s : scores) {
        json e = to_json(s.metrics);
        e["model"] = s.key.model;
        e["protocol"] = s.key.protocol;
        e["condition"] = s.key.condition;
        e["patient_id"] = s.patient_id;
        e["episode_id"] = s.episode_id;
        eps.push_back(std::move(e));
    }
    json rows = json::array();
    for (const auto& r : table) {
        json row = to_json(r.mean);
        row["model"] = r.key.model;
        row["protocol"] = r.key.protocol;
        row["condition"] = r.key.condition;
        row["n_episodes"] = r.n_episodes;
        json ranks = json::object();
        for (std::size_t m = 0; m < kMetricCount; ++m)
            if (r.rank[m] != Rank::none) ranks[kMetricNames[m]] = rank_name(r.rank[m]);
        row["rank"] = ranks;
        rows.push_back(std::move(row));
    }
    return json{{"schema_version", kSchemaVersion}, {"episodes", eps}, {"table", rows}};
}

inline std::vector<EpisodeScore> scores_from_report(const json& j) {
    try {
        std::vector<EpisodeScore> out;
        for (const auto& e : j.at("episodes")) {
            EpisodeScore s;
            s.key = {e.at("model").get<std::string>(), e.at("protocol").get<std::string>(),
                     e.at("condition").get<std::string>()};
            s.patient_id = e.at("patient_id").get<std::string>();
            s.episode_id = e.at("episode_id").get<int>();
            s.metrics = metrics_from_json(e);
            out.push_back(std::move(s));
        }
        return out;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed report JSON: ") + e.what());
    }
}

/// Plain-text rendering: one block per (protocol, condition); `*` marks the
/// best value of a column, `+` the second best.
inline std::string render_table(const std::vector<TableRow>& rows) {
    std::ostringstream out;
    out << "* best, + second best (lower is better; |Bias| for Bias)\n";
    std::size_t i = 0;
    while (i < rows.size()) {
        const auto& head = rows[i].key;
        out << "\nProtocol " << head.protocol << (head.condition.empty() ? "" : "  [" + head.condition + "]") << '\n';
        std::size_t width = 5;
        std::size_t j = i;
        while (j < rows.size() && rows[j].key.protocol == head.protocol && rows[j].key.condition == head.condition) {
            width = std::max(width, rows[j].key.model.size());
            ++j;
        }
        out << std::left << std::setw(static_cast<int>(width) + 2) << "Model";
        for (auto name : kMetricNames) out << std::right << std::setw(12) << name;
        out << std::right << std::setw(8) << "N" << '\n';
        for (std::size_t r = i; r < j; ++r) {
            out << std::left << std::setw(static_cast<int>(width) + 2) << rows[r].key.model;
            const auto v = rows[r].values();
            for (std::size_t m = 0; m < kMetricCount; ++m) {
                std::ostringstream cell;
                cell << std::fixed << std::setprecision(2) << v[m]
                     << (rows[r].rank[m] == Rank::best ? "*" : rows[r].rank[m] == Rank::second ? "+" : " ");
                out << std::right << std::setw(12) << cell.str();
            }
            out << std::right << std::setw(8) << rows[r].n_episodes << '\n';
        }
        i = j;
    }
    return out.str();
}

// --- calibration ------------------------------------------------------------

inline json to_json(const CalibrationSummary& s) {
    return json{{"n_points", s.n_points},         {"truth_mean", s.truth_mean}, {"truth_std", s.truth_std},
                {"imputed_mean", s.imputed_mean}, {"imputed_std", s.imputed_std}, {"delta", s.delta}};
}

inline void write_histogram_csv(std::ostream& out, const CalibrationSummary& s) {
    out << "bin_low,bin_high,truth_count,imputed_count\n";
    for (std::size_t b = 0; b < kHistBins; ++b) {
        const double lo = kHistLow + kHistBin * static_cast<double>(b);
        out << csv::format_double(lo) << ',' << csv::format_double(lo + kHistBin) << ',' << s.truth_hist[b] << ','
            << s.imputed_hist[b] << '\n';
    }
}

// --- routing ----------------------------------------------------------------

struct RoutedEpisode {
    std::string patient_id;
    int episode_id = 0;
    std::vector<RoutingDecision> decisions;
};

inline json routing_to_json(const std::vector<RoutedEpisode>& routed) {
    json ds = json::array();
    std::size_t n = 0, stationary = 0;
    for (const auto& r : routed)
        for (const auto& d : r.decisions) {
            ++n;
            stationary += d.label == GapLabel::stationary;
            json e{{"patient_id", r.patient_id},
                   {"episode_id", r.episode_id},
                   {"start_index", d.gap.start},
                   {"length", d.gap.length},
                   {"label", to_string(d.label)},
                   {"calm_fraction", d.calm_fraction},
                   {"n_gradients", d.n_gradients},
                   {"left_boundary", nullptr},
                   {"right_boundary", nullptr}};
            if (d.left_boundary) e["left_boundary"] = *d.left_boundary;
            if (d.right_boundary) e["right_boundary"] = *d.right_boundary;
            ds.push_back(std::move(e));
        }
    const double sf = n ? static_cast<double>(stationary) / static_cast<double>(n) : 0.0;
    return json{{"decisions", ds},
                {"summary", {{"n_gaps", n}, {"stationary_fraction", sf}, {"transient_fraction", n ? 1.0 - sf : 0.0}}}};
}

// --- file helpers -----------------------------------------------------------

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
    }
}

inline void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path + "'");
    out << j.dump(2) << '\n';
}

}  // namespace regime_bench::io
