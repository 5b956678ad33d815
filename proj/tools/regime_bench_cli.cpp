#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include <regime_bench.hpp>

namespace fs = std::filesystem;
using namespace regime_bench;

namespace {

/// Bad flag combinations detected after parsing; exits with code 2.
struct UsageError : Error {
    using Error::Error;
};

struct IngestFlags {
    std::string input;
    int partition_gap = 30;
    bool split_days = false;
    bool linear_fill = false;

    void add_to(CLI::App* cmd, bool input_required = true) {
        auto* opt = cmd->add_option("--input", input, "CGM CSV (patient_id,timestamp,glucose,carbs,bolus,basal)")
                        ->check(CLI::ExistingFile);
        if (input_required) opt->required();
        cmd->add_option("--partition-gap", partition_gap, "episode break threshold, minutes")
            ->capture_default_str();
        cmd->add_flag("--split-days", split_days, "also break episodes at midnight");
        cmd->add_flag("--linear-fill", linear_fill, "interpolate interior sensor gaps after ingest");
    }

    std::vector<Episode> load() const {
        auto eps = ingest_csv(fs::path(input), IngestOptions{partition_gap, split_days});
        if (linear_fill)
            for (auto& ep : eps) ep = regime_bench::linear_fill(ep);
        return eps;
    }
};

using EpisodeKey = std::pair<std::string, int>;

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path + "'");
    return out;
}

std::vector<io::MaskRecord> load_masks(const std::string& path) {
    return io::masks_from_json(io::read_json_file(path));
}

/// Pairs each mask record with its episode; masks naming unknown episodes or
/// disagreeing on length are rejected.
std::vector<std::pair<const Episode*, const Mask*>> join(const std::vector<Episode>& eps,
                                                         const std::vector<io::MaskRecord>& masks) {
    std::map<EpisodeKey, const Episode*> index;
    for (const auto& ep : eps) index[{ep.patient_id, ep.episode_id}] = &ep;
    std::vector<std::pair<const Episode*, const Mask*>> out;
    for (const auto& r : masks) {
        auto it = index.find({r.patient_id, r.episode_id});
        if (it == index.end())
            throw CoverageError("mask refers to unknown episode " + r.patient_id + "/" + std::to_string(r.episode_id));
        check_same_length(*it->second, r.mask);
        out.emplace_back(it->second, &r.mask);
    }
    return out;
}

std::vector<Imputation> read_imputations(const std::vector<std::string>& paths,
                                         const std::vector<std::pair<const Episode*, const Mask*>>& pairs) {
    std::vector<Episode> eps;
    std::vector<Mask> masks;
    for (const auto& [ep, m] : pairs) {
        eps.push_back(*ep);
        masks.push_back(*m);
    }
    std::vector<Imputation> out;
    for (const auto& p : paths) {
        auto imps = load_external(p, eps, masks);
        out.insert(out.end(), imps.begin(), imps.end());
    }
    return out;
}

std::vector<Imputation> only_method(std::vector<Imputation> imps, const std::string& method) {
    if (method.empty()) {
        for (const auto& i : imps)
            if (i.method != imps.front().method)
                throw UsageError("imputation file holds several methods; pick one with --method");
        return imps;
    }
    std::erase_if(imps, [&](const Imputation& i) { return i.method != method; });
    if (imps.empty()) throw UsageError("no imputations for method '" + method + "'");
    return imps;
}

std::string condition_label(double v) {
    return csv::format_double(v);
}

// --- synth ------------------------------------------------------------------

struct SynthFlags {
    std::string out;
    int days = 50;
    std::uint64_t seed = 7;
    double noise = 1.0;
    double hypo_depth = 15.0;
    bool no_hypo = false;
};

void cmd_synth(const SynthFlags& f) {
    SynthConfig cfg;
    cfg.days = f.days;
    cfg.seed = f.seed;
    cfg.noise_std = f.noise;
    if (!f.no_hypo) cfg.hypo_depth = f.hypo_depth;
    const auto data = generate(cfg);

    fs::create_directories(f.out);
    const fs::path dir(f.out);
    {
        auto out = open_out((dir / "cgm.csv").string());
        write_cgm_csv(out, data.episodes);
    }
    {
        const auto model = reference_missingness_model();
        std::vector<Episode> gapped(data.episodes.size());
        parallel_for(gapped.size(), [&](std::size_t i) {
            gapped[i] = apply_mask(data.episodes[i], generate_mask(data.episodes[i], model, f.seed));
        });
        auto out = open_out((dir / "cgm_gapped.csv").string());
        write_cgm_csv(out, gapped);
    }
    {
        auto out = open_out((dir / "tcr.csv").string());
        io::write_tcr_csv(out, data.tcr);
    }
    {
        auto out = open_out((dir / "labels.csv").string());
        write_labels_csv(out, data);
    }
}

// --- fit --------------------------------------------------------------------

void cmd_fit(const IngestFlags& in, const std::string& out, int min_gaps) {
    const auto eps = in.load();
    FitOptions opt;
    opt.min_gaps = static_cast<std::size_t>(min_gaps);
    const auto valid = valid_days(eps);
    try {
        io::write_json_file(out, io::to_json(estimate_model(eps, opt)));
    } catch (const Error&) {
        if (!valid.empty()) {
            const auto onset = onset_probabilities(extract_gaps(eps, valid), valid);
            std::cerr << "onset probabilities:";
            for (double p : onset) std::cerr << ' ' << csv::format_double(p);
            std::cerr << '\n';
        }
        throw;
    }
}

// --- mask -------------------------------------------------------------------

void cmd_mask(const IngestFlags& in, const std::string& model_path, std::uint64_t seed, const std::string& out) {
    const auto eps = in.load();
    const auto model = io::model_from_json(io::read_json_file(model_path));
    std::vector<io::MaskRecord> records(eps.size());
    parallel_for(eps.size(), [&](std::size_t i) {
        records[i] = {eps[i].patient_id, eps[i].episode_id, generate_mask(eps[i], model, seed)};
    });
    io::write_json_file(out, io::masks_to_json(records));
}

// --- stress -----------------------------------------------------------------

struct StressFlags {
    std::string protocol;
    double ratio = 0.1;
    int n_peaks = 1;
    int hypo_window = 60;
    double threshold = 70.0;
    std::string tcr;
    std::uint64_t seed = 7;
    std::string out;
    std::string windows;
};

void cmd_stress(const IngestFlags& in, const StressFlags& f) {
    const auto protocol = protocol_from_string(f.protocol);
    if (protocol == Protocol::C && f.tcr.empty()) throw UsageError("protocol C needs --tcr metadata");
    if (protocol == Protocol::A && !(f.ratio >= 0.0 && f.ratio <= 1.0)) throw UsageError("--ratio must lie in [0, 1]");
    const auto eps = in.load();

    std::vector<TcrInterval> tcr;
    if (protocol == Protocol::C) {
        std::ifstream t(f.tcr);
        if (!t) throw UsageError("cannot open '" + f.tcr + "'");
        tcr = io::read_tcr_csv(t);
    }

    std::string condition;
    switch (protocol) {
        case Protocol::A: condition = "ratio=" + condition_label(f.ratio); break;
        case Protocol::B: condition = "n_peaks=" + std::to_string(f.n_peaks); break;
        case Protocol::C: condition = "window=" + std::to_string(f.hypo_window); break;
    }

    std::vector<ProtocolMasks> results(eps.size());
    parallel_for(eps.size(), [&](std::size_t i) {
        const auto& ep = eps[i];
        const auto seed = derive_seed(f.seed, ep.patient_id, ep.episode_id);
        switch (protocol) {
            case Protocol::A: results[i] = allocate_stationary_mask(ep, find_stable_windows(ep), f.ratio, seed); break;
            case Protocol::B: results[i] = build_peak_masks(ep, f.n_peaks, seed); break;
            case Protocol::C: results[i] = build_hypo_masks(ep, tcr, f.hypo_window, f.threshold); break;
        }
        results[i].mask.condition = condition;
    });

    std::vector<io::MaskRecord> records;
    std::vector<RegimeWindow> windows;
    for (std::size_t i = 0; i < eps.size(); ++i) {
        if (protocol == Protocol::C && results[i].windows.empty()) continue;
        records.push_back({eps[i].patient_id, eps[i].episode_id, results[i].mask});
        windows.insert(windows.end(), results[i].windows.begin(), results[i].windows.end());
    }
    if (records.empty()) throw SelectionError("no episode produced a stress window");
    io::write_json_file(f.out, io::masks_to_json(records));
    if (!f.windows.empty()) io::write_json_file(f.windows, io::windows_to_json(windows));
}

// --- impute -----------------------------------------------------------------

void cmd_impute(const IngestFlags& in, const std::string& masks_path, const std::vector<std::string>& methods,
                const std::string& external, const std::string& out_path) {
    if (methods.empty() == external.empty()) throw UsageError("give either --method or --external");
    for (const auto& m : methods)
        if (std::find(builtin_methods().begin(), builtin_methods().end(), m) == builtin_methods().end())
            throw UsageError("unknown method '" + m + "'");
    const auto eps = in.load();
    const auto masks = load_masks(masks_path);
    const auto pairs = join(eps, masks);

    std::vector<Imputation> imps;
    if (!external.empty()) {
        imps = read_imputations({external}, pairs);
    } else {
        for (const auto& m : methods) {
            std::vector<Imputation> part(pairs.size());
            parallel_for(pairs.size(), [&](std::size_t i) { part[i] = impute(m, *pairs[i].first, *pairs[i].second); });
            imps.insert(imps.end(), part.begin(), part.end());
        }
    }
    auto out = open_out(out_path);
    write_imputations_csv(out, imps);
}

// --- evaluate ---------------------------------------------------------------

void check_windows(const std::string& path, const std::vector<io::MaskRecord>& masks) {
    std::map<EpisodeKey, const Mask*> index;
    for (const auto& r : masks) index[{r.patient_id, r.episode_id}] = &r.mask;
    for (const auto& w : io::windows_from_json(io::read_json_file(path))) {
        auto it = index.find({w.patient_id, w.episode_id});
        if (it == index.end() || w.end_index > it->second->size())
            throw IntegrityError("window outside the masks: " + w.patient_id + "/" + std::to_string(w.episode_id));
        std::size_t masked = 0;
        for (std::size_t t = w.start_index; t < w.end_index; ++t) masked += !it->second->retained(t);
        if (masked != w.masked_length)
            throw IntegrityError("window at " + w.patient_id + "/" + std::to_string(w.episode_id) + " [" +
                                 std::to_string(w.start_index) + ", " + std::to_string(w.end_index) +
                                 ") disagrees with its mask");
    }
}

void cmd_evaluate(const IngestFlags& in, const std::vector<std::string>& imputed, const std::string& masks_path,
                  const std::string& windows_path, const std::string& out, const std::string& table_path) {
    const auto eps = in.load();
    const auto masks = load_masks(masks_path);
    if (!windows_path.empty()) check_windows(windows_path, masks);
    const auto pairs = join(eps, masks);
    const auto imps = read_imputations(imputed, pairs);

    // load_external emits methods in file order, each covering every pair.
    std::vector<std::optional<EpisodeScore>> scores(imps.size());
    parallel_for(imps.size(), [&](std::size_t i) {
        const auto& [ep, mask] = pairs[i % pairs.size()];
        if (scored_indices(*ep, *mask).empty()) return;
        EpisodeScore s;
        s.key = {imps[i].method, std::string(to_string(mask->provenance)), mask->condition};
        s.patient_id = ep->patient_id;
        s.episode_id = ep->episode_id;
        s.metrics = evaluate(*ep, imps[i].values, *mask);
        scores[i] = s;
    });
    std::vector<EpisodeScore> kept;
    for (auto& s : scores)
        if (s) kept.push_back(std::move(*s));
    const auto table = aggregate(kept);
    io::write_json_file(out, io::report_to_json(kept, table));
    const auto text = io::render_table(table);
    if (table_path.empty()) {
        std::cout << text;
    } else {
        auto t = open_out(table_path);
        t << text;
    }
}

// --- calibrate --------------------------------------------------------------

void cmd_calibrate(const IngestFlags& in, const std::string& imputed, const std::string& masks_path,
                   const std::string& windows_path, const std::string& method, const std::string& regime,
                   double threshold, const std::string& out, const std::string& hist) {
    if (regime != "peak" && regime != "hypo" && regime != "all")
        throw UsageError("--regime must be peak, hypo or all");
    const auto eps = in.load();
    const auto masks = load_masks(masks_path);
    const auto pairs = join(eps, masks);
    const auto imps = only_method(read_imputations({imputed}, pairs), method);

    std::map<EpisodeKey, std::vector<RegimeWindow>> windows;
    if (!windows_path.empty())
        for (auto& w : io::windows_from_json(io::read_json_file(windows_path)))
            windows[{w.patient_id, w.episode_id}].push_back(w);

    CalibrationAccumulator acc;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto& [ep, mask] = pairs[i];
        const auto wit = windows.find({ep->patient_id, ep->episode_id});
        auto in_window = [&](std::size_t t) {
            if (windows_path.empty()) return true;
            if (wit == windows.end()) return false;
            for (const auto& w : wit->second)
                if (t >= w.start_index && t < w.end_index) return true;
            return false;
        };
        acc.add_episode(*ep, imps[i].values, *mask, [&](std::size_t t, double y) {
            if (regime == "hypo") return y < threshold && in_window(t);
            return in_window(t);
        });
    }
    const auto s = acc.summary();
    auto j = io::to_json(s);
    j["method"] = imps.front().method;
    j["regime"] = regime;
    io::write_json_file(out, j);
    if (!hist.empty()) {
        auto h = open_out(hist);
        io::write_histogram_csv(h, s);
    }
}

// --- route ------------------------------------------------------------------

void cmd_route(const IngestFlags& in, const std::string& masks_path, const std::string& external,
               const std::string& method, double gradient_threshold, int context, const std::string& out,
               const std::string& report) {
    const auto eps = in.load();
    const auto masks = load_masks(masks_path);
    const auto pairs = join(eps, masks);
    std::vector<Imputation> ext;
    if (!external.empty()) ext = only_method(read_imputations({external}, pairs), method);

    StabilityCriteria c;
    c.gradient_threshold = gradient_threshold;
    std::vector<AdaptiveResult> results(pairs.size());
    parallel_for(pairs.size(), [&](std::size_t i) {
        results[i] = adaptive_impute(*pairs[i].first, *pairs[i].second, ext.empty() ? nullptr : &ext[i], c, context);
    });

    std::vector<Imputation> imps;
    std::vector<io::RoutedEpisode> routed;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        imps.push_back(results[i].imputation);
        routed.push_back({pairs[i].first->patient_id, pairs[i].first->episode_id, results[i].decisions});
    }
    auto o = open_out(out);
    write_imputations_csv(o, imps);
    if (!report.empty()) io::write_json_file(report, io::routing_to_json(routed));
}

// --- report -----------------------------------------------------------------

void cmd_report(const std::vector<std::string>& reports, const std::string& out) {
    std::vector<EpisodeScore> scores;
    for (const auto& r : reports) {
        auto s = io::scores_from_report(io::read_json_file(r));
        scores.insert(scores.end(), s.begin(), s.end());
    }
    const auto text = io::render_table(aggregate(scores));
    if (out.empty()) {
        std::cout << text;
    } else {
        auto o = open_out(out);
        o << text;
    }
}

// --- export-inputs ----------------------------------------------------------

void cmd_export_inputs(const IngestFlags& in, const std::string& masks_path, const std::string& out) {
    const auto eps = in.load();
    const auto masks = load_masks(masks_path);
    auto o = open_out(out);
    o << "patient_id,episode_id,t,masked_glucose,carbs,bolus,basal,sin_t,cos_t\n";
    for (const auto& [ep, mask] : join(eps, masks)) {
        std::ostringstream block;
        write_inputs_csv(block, build_inputs(*ep, *mask));
        std::istringstream lines(block.str());
        std::string line;
        std::getline(lines, line);  // header
        const auto prefix = csv::quote(ep->patient_id) + "," + std::to_string(ep->episode_id) + ",";
        while (std::getline(lines, line)) o << prefix << line << '\n';
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Regime-aware CGM imputation benchmark"};
    app.require_subcommand(1);

    SynthFlags synth;
    auto* c_synth = app.add_subcommand("synth", "generate a labeled synthetic CGM corpus");
    c_synth->add_option("--out", synth.out, "output directory")->required();
    c_synth->add_option("--days", synth.days)->capture_default_str();
    c_synth->add_option("--seed", synth.seed)->capture_default_str();
    c_synth->add_option("--noise", synth.noise, "Gaussian noise std, mg/dL")->capture_default_str();
    c_synth->add_option("--hypo-depth", synth.hypo_depth, "dip depth below 70 mg/dL")->capture_default_str();
    c_synth->add_flag("--no-hypo", synth.no_hypo, "omit TCR episodes and dips");

    IngestFlags fit_in;
    std::string fit_out;
    int min_gaps = 30;
    auto* c_fit = app.add_subcommand("fit", "estimate the missingness model");
    fit_in.add_to(c_fit);
    c_fit->add_option("--out", fit_out, "model JSON")->required();
    c_fit->add_option("--min-gaps", min_gaps, "fewest sustained gaps per regime")->capture_default_str();

    IngestFlags mask_in;
    std::string mask_model, mask_out;
    std::uint64_t mask_seed = 7;
    auto* c_mask = app.add_subcommand("mask", "sample generative masks");
    mask_in.add_to(c_mask);
    c_mask->add_option("--model", mask_model)->required()->check(CLI::ExistingFile);
    c_mask->add_option("--seed", mask_seed)->capture_default_str();
    c_mask->add_option("--out", mask_out, "masks JSON")->required();

    IngestFlags stress_in;
    StressFlags stress;
    auto* c_stress = app.add_subcommand("stress", "build protocol A/B/C stress masks");
    stress_in.add_to(c_stress);
    c_stress->add_option("--protocol", stress.protocol)->required()->check(CLI::IsMember({"A", "B", "C"}));
    c_stress->add_option("--ratio", stress.ratio, "protocol A masking ratio")->capture_default_str();
    c_stress->add_option("--n-peaks", stress.n_peaks, "protocol B peaks per episode")->capture_default_str();
    c_stress->add_option("--hypo-window-min", stress.hypo_window, "protocol C window, minutes")
        ->capture_default_str();
    c_stress->add_option("--threshold", stress.threshold, "protocol C hypoglycemia threshold")->capture_default_str();
    c_stress->add_option("--tcr", stress.tcr, "TCR metadata CSV");
    c_stress->add_option("--seed", stress.seed)->capture_default_str();
    c_stress->add_option("--out", stress.out, "masks JSON")->required();
    c_stress->add_option("--windows", stress.windows, "windows JSON");

    IngestFlags imp_in;
    std::string imp_masks, imp_external, imp_out;
    std::vector<std::string> imp_methods;
    auto* c_imp = app.add_subcommand("impute", "run baseline imputers or validate an external file");
    imp_in.add_to(c_imp);
    c_imp->add_option("--masks", imp_masks)->required()->check(CLI::ExistingFile);
    c_imp->add_option("--method", imp_methods, "mean, median, locf or lerp (repeatable)");
    c_imp->add_option("--external", imp_external, "external imputation CSV")->check(CLI::ExistingFile);
    c_imp->add_option("--out", imp_out, "imputation CSV")->required();

    IngestFlags ev_in;
    std::vector<std::string> ev_imputed;
    std::string ev_masks, ev_windows, ev_out, ev_table;
    auto* c_ev = app.add_subcommand("evaluate", "score imputations on masked indices");
    ev_in.add_to(c_ev);
    c_ev->add_option("--imputed", ev_imputed, "imputation CSVs")->required()->check(CLI::ExistingFile);
    c_ev->add_option("--masks", ev_masks)->required()->check(CLI::ExistingFile);
    c_ev->add_option("--windows", ev_windows)->check(CLI::ExistingFile);
    c_ev->add_option("--out", ev_out, "report JSON")->required();
    c_ev->add_option("--table", ev_table, "rendered table (stdout if absent)");

    IngestFlags cal_in;
    std::string cal_imputed, cal_masks, cal_windows, cal_method, cal_regime = "all", cal_out, cal_hist;
    double cal_threshold = 70.0;
    auto* c_cal = app.add_subcommand("calibrate", "conditional distribution of imputed vs true values");
    cal_in.add_to(c_cal);
    c_cal->add_option("--imputed", cal_imputed)->required()->check(CLI::ExistingFile);
    c_cal->add_option("--masks", cal_masks)->required()->check(CLI::ExistingFile);
    c_cal->add_option("--windows", cal_windows, "restrict to these windows")->check(CLI::ExistingFile);
    c_cal->add_option("--method", cal_method);
    c_cal->add_option("--regime", cal_regime, "peak, hypo or all")->capture_default_str();
    c_cal->add_option("--threshold", cal_threshold, "hypo regime threshold")->capture_default_str();
    c_cal->add_option("--out", cal_out, "summary JSON")->required();
    c_cal->add_option("--hist", cal_hist, "histogram CSV");

    IngestFlags route_in;
    std::string route_masks, route_external, route_method, route_out, route_report;
    double route_threshold = 0.6;
    int route_context = 30;
    auto* c_route = app.add_subcommand("route", "adaptive Lerp/external imputation");
    route_in.add_to(c_route);
    c_route->add_option("--masks", route_masks)->required()->check(CLI::ExistingFile);
    c_route->add_option("--external", route_external)->check(CLI::ExistingFile);
    c_route->add_option("--method", route_method, "method to take from the external file");
    c_route->add_option("--gradient-threshold", route_threshold, "mg/dL/min")->capture_default_str();
    c_route->add_option("--context-min", route_context, "context per side, minutes")->capture_default_str();
    c_route->add_option("--out", route_out, "imputation CSV")->required();
    c_route->add_option("--report", route_report, "routing JSON");

    std::vector<std::string> rep_in;
    std::string rep_out;
    auto* c_rep = app.add_subcommand("report", "merge evaluation reports into one table");
    c_rep->add_option("--input", rep_in, "report JSONs")->required()->check(CLI::ExistingFile);
    c_rep->add_option("--out", rep_out, "table text (stdout if absent)");

    IngestFlags exp_in;
    std::string exp_masks, exp_out;
    auto* c_exp = app.add_subcommand("export-inputs", "model input vectors for external imputers");
    exp_in.add_to(c_exp);
    c_exp->add_option("--masks", exp_masks)->required()->check(CLI::ExistingFile);
    c_exp->add_option("--out", exp_out)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*c_synth) cmd_synth(synth);
        else if (*c_fit) cmd_fit(fit_in, fit_out, min_gaps);
        else if (*c_mask) cmd_mask(mask_in, mask_model, mask_seed, mask_out);
        else if (*c_stress) cmd_stress(stress_in, stress);
        else if (*c_imp) cmd_impute(imp_in, imp_masks, imp_methods, imp_external, imp_out);
        else if (*c_ev) cmd_evaluate(ev_in, ev_imputed, ev_masks, ev_windows, ev_out, ev_table);
        else if (*c_cal)
            cmd_calibrate(cal_in, cal_imputed, cal_masks, cal_windows, cal_method, cal_regime, cal_threshold, cal_out,
                          cal_hist);
        else if (*c_route)
            cmd_route(route_in, route_masks, route_external, route_method, route_threshold, route_context, route_out,
                      route_report);
        else if (*c_rep) cmd_report(rep_in, rep_out);
        else if (*c_exp) cmd_export_inputs(exp_in, exp_masks, exp_out);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
