#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <limits>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "error.hpp"
#include "least_squares.hpp"
#include "rng.hpp"
#include "types.hpp"

namespace regime_bench {

inline constexpr double kDurationMin = 10.0;   // shortest sustained gap, minutes
inline constexpr double kDurationMax = 240.0;  // delta_max
inline constexpr double kValidDayFraction = 0.5;

/// Exponential + Gaussian + constant density over sustained-gap durations
/// (minutes), with the normalized component masses on [10, 240].
struct DurationMixture {
    double A = 0.0;
    double k = 0.02;
    double B = 0.0;
    double mu = 120.0;
    double sigma = 20.0;
    double gamma = 0.0;
    double w_exp = 0.0;
    double w_gauss = 0.0;
    double w_unif = 1.0;

    double exp_term(double d) const { return A * std::exp(-k * (d - kDurationMin)); }
    double gauss_term(double d) const {
        const double z = (d - mu) / sigma;
        return B * std::exp(-0.5 * z * z);
    }
    double density(double d) const {
        const double offset = (d >= kDurationMin && d <= kDurationMax) ? gamma : 0.0;
        return exp_term(d) + gauss_term(d) + offset;
    }

    double exp_mass() const { return A * -std::expm1(-k * (kDurationMax - kDurationMin)) / k; }
    double gauss_mass() const {
        return B * sigma * std::sqrt(2.0 * std::numbers::pi) *
               (norm_cdf((kDurationMax - mu) / sigma) - norm_cdf((kDurationMin - mu) / sigma));
    }
    double unif_mass() const { return gamma * (kDurationMax - kDurationMin); }

    /// Recomputes w_* from the component integrals over [10, 240].
    void normalize_weights() {
        const double e = exp_mass(), g = gauss_mass(), u = unif_mass();
        const double total = e + g + u;
        if (!(total > 0.0) || !std::isfinite(total))
            throw FitError("duration mixture has no mass on [10, 240]");
        w_exp = e / total;
        w_gauss = g / total;
        w_unif = 1.0 - w_exp - w_gauss;
        if (w_unif < 0.0) w_unif = 0.0;
    }

    /// CDF of the sampling distribution (weighted truncated components) at x.
    double cdf(double x) const {
        if (x < kDurationMin) return 0.0;
        if (x >= kDurationMax) return 1.0;
        const double span = kDurationMax - kDurationMin;
        const double fe = -std::expm1(-k * (x - kDurationMin)) / -std::expm1(-k * span);
        const double lo = norm_cdf((kDurationMin - mu) / sigma);
        const double hi = norm_cdf((kDurationMax - mu) / sigma);
        const double fg = hi > lo ? (norm_cdf((x - mu) / sigma) - lo) / (hi - lo)
                                  : (x >= mu ? 1.0 : 0.0);
        const double fu = (x - kDurationMin) / span;
        return w_exp * fe + w_gauss * fg + w_unif * fu;
    }
};

struct RegimeModel {
    double pi_short = 0.0;
    DurationMixture mixture;
};

struct MissingnessModel {
    std::array<double, 24> onset_prob{};
    RegimeModel day;
    RegimeModel night;
    double delta_max = kDurationMax;

    const RegimeModel& regime(Regime r) const { return r == Regime::day ? day : night; }
    RegimeModel& regime(Regime r) { return r == Regime::day ? day : night; }
};

struct DayKey {
    std::string patient_id;
    std::int64_t day = 0;  // days since epoch
    friend auto operator<=>(const DayKey&, const DayKey&) = default;
};

using DaySet = std::set<DayKey>;

struct GapEvent {
    std::string patient_id;
    int episode_id = 0;
    std::int64_t day = 0;
    int start_hour = 0;
    std::size_t start_index = 0;
    int duration = 0;  // minutes

    Regime regime() const { return regime_of_hour(start_hour); }
};

/// Days whose observed fraction of the 288 daily slots is at least one half.
inline DaySet valid_days(const std::vector<Episode>& episodes) {
    std::map<DayKey, int> counts;
    for (const auto& ep : episodes)
        for (std::size_t t = 0; t < ep.size(); ++t)
            if (ep.observed(t)) ++counts[{ep.patient_id, ep.day_of(t)}];
    DaySet out;
    for (const auto& [key, n] : counts)
        if (static_cast<double>(n) / kStepsPerDay >= kValidDayFraction) out.insert(key);
    return out;
}

/// Maximal missing runs starting on a valid day.
inline std::vector<GapEvent> extract_gaps(const std::vector<Episode>& episodes, const DaySet& valid) {
    std::vector<GapEvent> out;
    for (const auto& ep : episodes) {
        for (const auto& run : runs_of(ep.observed_flags(), 0)) {
            const auto day = ep.day_of(run.start);
            if (!valid.count({ep.patient_id, day})) continue;
            out.push_back({ep.patient_id, ep.episode_id, day, ep.hour_of(run.start), run.start,
                           static_cast<int>(run.length) * kStepMinutes});
        }
    }
    return out;
}

/// Fraction of valid days on which at least one gap starts in each hour.
inline std::array<double, 24> onset_probabilities(const std::vector<GapEvent>& gaps, const DaySet& valid) {
    if (valid.empty()) throw EstimationError("no valid days to estimate onset probabilities");
    std::set<std::tuple<std::string, std::int64_t, int>> hits;
    for (const auto& g : gaps)
        if (valid.count({g.patient_id, g.day})) hits.insert({g.patient_id, g.day, g.start_hour});
    std::array<double, 24> counts{};
    for (const auto& h : hits) counts[static_cast<std::size_t>(std::get<2>(h))] += 1.0;
    for (auto& c : counts) c /= static_cast<double>(valid.size());
    return counts;
}

inline double short_gap_probability(const std::vector<GapEvent>& gaps, Regime regime) {
    std::size_t n = 0, shorts = 0;
    for (const auto& g : gaps) {
        if (g.regime() != regime) continue;
        ++n;
        shorts += (g.duration == kStepMinutes);
    }
    if (n == 0) throw EstimationError("no " + std::string(to_string(regime)) + " gaps");
    return static_cast<double>(shorts) / static_cast<double>(n);
}

/// Duration histogram on the grid values 10, 15, ..., 240 (one 5-minute bin
/// centred on each), normalized to a density per minute.
struct DurationHistogram {
    std::vector<double> centers;
    std::vector<double> density;
    std::size_t n = 0;
};

inline DurationHistogram duration_histogram(const std::vector<int>& durations) {
    DurationHistogram h;
    for (int d = static_cast<int>(kDurationMin); d <= static_cast<int>(kDurationMax); d += kStepMinutes)
        h.centers.push_back(d);
    h.density.assign(h.centers.size(), 0.0);
    for (int d : durations) {
        if (d < kDurationMin || d > kDurationMax) continue;
        const auto bin = static_cast<std::size_t>(std::lround((d - kDurationMin) / kStepMinutes));
        h.density[bin] += 1.0;
        ++h.n;
    }
    if (h.n > 0)
        for (auto& v : h.density) v /= static_cast<double>(h.n) * kStepMinutes;
    return h;
}

struct FitOptions {
    std::size_t min_gaps = 30;
    LeastSquaresOptions solver{};
};

namespace detail {

using Theta = Eigen::Matrix<double, 6, 1>;  // A, k, B, mu, sigma, gamma

inline LeastSquaresResult<6> fit_from(const DurationHistogram& h, const Theta& start,
                                      const LeastSquaresOptions& solver) {
    const auto m = static_cast<Eigen::Index>(h.centers.size());
    auto eval = [&](const Theta& p, Eigen::VectorXd& r, Eigen::Matrix<double, Eigen::Dynamic, 6>& J) {
        r.resize(m);
        J.resize(m, 6);
        const double A = p[0], k = p[1], B = p[2], mu = p[3], sigma = p[4], gamma = p[5];
        for (Eigen::Index i = 0; i < m; ++i) {
            const double d = h.centers[static_cast<std::size_t>(i)];
            const double e = std::exp(-k * (d - kDurationMin));
            const double z = (d - mu) / sigma;
            const double g = std::exp(-0.5 * z * z);
            r[i] = A * e + B * g + gamma - h.density[static_cast<std::size_t>(i)];
            J(i, 0) = e;
            J(i, 1) = -A * (d - kDurationMin) * e;
            J(i, 2) = g;
            J(i, 3) = B * g * z / sigma;
            J(i, 4) = B * g * z * z / sigma;
            J(i, 5) = 1.0;
        }
    };
    const double inf = std::numeric_limits<double>::infinity();
    Theta lower, upper;
    lower << 0.0, 1e-6, 0.0, kDurationMin, 1e-3, 0.0;
    upper << inf, 1.0, inf, kDurationMax, 120.0, inf;
    return bounded_levenberg_marquardt<6>(eval, start, lower, upper, solver);
}

}  // namespace detail

/// Fits the mixture density to a normalized histogram by bounded nonlinear
/// least squares, then derives the component weights.
inline DurationMixture fit_mixture_histogram(const DurationHistogram& h, const FitOptions& opt = {}) {
    double max_bin = 0.0, min_bin = std::numeric_limits<double>::infinity(), near_120 = 0.0;
    for (std::size_t i = 0; i < h.centers.size(); ++i) {
        max_bin = std::max(max_bin, h.density[i]);
        min_bin = std::min(min_bin, h.density[i]);
        if (std::abs(h.centers[i] - 120.0) <= 5.0) near_120 = std::max(near_120, h.density[i]);
    }

    // The first start is the warm-up prior; the others only matter when it
    // lands in a worse local minimum. Ties keep the earlier start.
    std::vector<detail::Theta> starts;
    for (double k0 : {0.02, 0.1, 0.005})
        for (double mu0 : {120.0, 60.0, 180.0}) {
            detail::Theta s;
            s << max_bin, k0, near_120, mu0, 20.0, min_bin;
            starts.push_back(s);
        }

    std::optional<LeastSquaresResult<6>> best;
    double last_cost = 0.0;
    for (const auto& s : starts) {
        auto res = detail::fit_from(h, s, opt.solver);
        last_cost = res.cost;
        if (!res.converged) continue;
        if (!best || res.cost < best->cost) best = res;
    }
    if (!best)
        throw ConvergenceError("duration mixture fit did not converge", std::sqrt(2.0 * last_cost));

    DurationMixture mix;
    mix.A = best->x[0];
    mix.k = best->x[1];
    mix.B = best->x[2];
    mix.mu = best->x[3];
    mix.sigma = best->x[4];
    mix.gamma = best->x[5];
    mix.normalize_weights();
    return mix;
}

/// Fits the sustained-gap duration mixture for one regime. Gaps of 5 minutes
/// and gaps longer than 240 minutes are excluded.
inline DurationMixture fit_mixture(const std::vector<GapEvent>& gaps, Regime regime, const FitOptions& opt = {}) {
    std::vector<int> durations;
    for (const auto& g : gaps)
        if (g.regime() == regime && g.duration > kStepMinutes && g.duration <= kDurationMax)
            durations.push_back(g.duration);
    if (durations.size() < opt.min_gaps)
        throw FitError("insufficient " + std::string(to_string(regime)) + " gaps for mixture fit: " +
                       std::to_string(durations.size()) + " < " + std::to_string(opt.min_gaps));
    return fit_mixture_histogram(duration_histogram(durations), opt);
}

/// Full estimation pipeline from gapped episodes.
inline MissingnessModel estimate_model(const std::vector<Episode>& episodes, const FitOptions& opt = {}) {
    const auto valid = valid_days(episodes);
    const auto gaps = extract_gaps(episodes, valid);
    MissingnessModel m;
    m.onset_prob = onset_probabilities(gaps, valid);
    for (Regime r : {Regime::day, Regime::night}) {
        m.regime(r).pi_short = short_gap_probability(gaps, r);
        m.regime(r).mixture = fit_mixture(gaps, r, opt);
    }
    return m;
}

}  // namespace regime_bench
