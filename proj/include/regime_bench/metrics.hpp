#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "error.hpp"
#include "types.hpp"

namespace regime_bench {

struct PointwiseMetrics {
    double rmse = 0.0;
    double bias = 0.0;    // mean(imputed - truth)
    double emp_se = 0.0;  // population std of residuals
    double mard = 0.0;    // percent
    std::size_t n_points = 0;
};

struct MetricsReport {
    double rmse = 0.0;
    double bias = 0.0;
    double emp_se = 0.0;
    double mard = 0.0;
    double dtw = 0.0;
    std::size_t n_points = 0;
    std::size_t n_gaps = 0;
};

/// Indices scored for an episode: masked by the evaluation mask and present in the truth.
inline std::vector<std::size_t> scored_indices(const Episode& truth, const Mask& mask) {
    check_same_length(truth, mask);
    std::vector<std::size_t> out;
    for (std::size_t t = 0; t < truth.size(); ++t)
        if (!mask.retained(t) && truth.observed(t)) out.push_back(t);
    return out;
}

/// Residual statistics over paired values.
inline PointwiseMetrics pointwise_metrics(std::span<const double> truth, std::span<const double> imputed) {
    if (truth.size() != imputed.size()) throw DimensionError("truth/imputed length mismatch");
    if (truth.empty()) throw MetricDomainError("no masked points to score");
    PointwiseMetrics m;
    m.n_points = truth.size();
    double sum = 0.0, sq = 0.0, rel = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (!(truth[i] > 0.0))
            throw MetricDomainError("ground truth must be positive for MARD, got " + std::to_string(truth[i]));
        const double e = imputed[i] - truth[i];
        sum += e;
        sq += e * e;
        rel += std::abs(e / truth[i]);
    }
    const double n = static_cast<double>(truth.size());
    m.bias = sum / n;
    m.rmse = std::sqrt(sq / n);
    m.emp_se = std::sqrt(std::max(0.0, sq / n - m.bias * m.bias));
    m.mard = 100.0 * rel / n;
    return m;
}

/// Unconstrained DTW with |a_i - b_j| local cost and steps (1,0), (0,1), (1,1).
inline double dtw_distance(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw DimensionError("dtw of an empty sequence");
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> prev(b.size() + 1, inf), cur(b.size() + 1, inf);
    prev[0] = 0.0;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = inf;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const double cost = std::abs(a[i - 1] - b[j - 1]);
            cur[j] = cost + std::min({prev[j], cur[j - 1], prev[j - 1]});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

/// DTW per contiguous masked run, summed over the episode.
inline double segment_dtw(std::span<const double> truth, std::span<const double> imputed, const Mask& mask) {
    if (truth.size() != imputed.size() || truth.size() != mask.size())
        throw DimensionError("segment_dtw length mismatch");
    const auto runs = masked_runs(mask);
    if (runs.empty()) throw MetricDomainError("mask has no masked runs");
    double total = 0.0;
    for (const auto& r : runs)
        total += dtw_distance(truth.subspan(r.start, r.length), imputed.subspan(r.start, r.length));
    return total;
}

/// Full metric set on one episode. Masked samples absent from the truth are
/// not scored and split masked runs for DTW.
inline MetricsReport evaluate(const Episode& truth, const std::vector<double>& imputed, const Mask& mask) {
    check_same_length(truth, mask);
    if (imputed.size() != truth.size()) throw DimensionError("imputation length mismatch");
    const auto idx = scored_indices(truth, mask);
    std::vector<double> y, yhat;
    for (auto t : idx) {
        y.push_back(*truth.glucose[t]);
        yhat.push_back(imputed[t]);
    }
    const auto pm = pointwise_metrics(y, yhat);

    Mask scored = Mask::all_retained(truth.size());
    for (auto t : idx) scored.bits[t] = 0;
    std::vector<double> dense(truth.size(), 0.0);
    for (auto t : idx) dense[t] = *truth.glucose[t];

    MetricsReport r;
    r.rmse = pm.rmse;
    r.bias = pm.bias;
    r.emp_se = pm.emp_se;
    r.mard = pm.mard;
    r.n_points = pm.n_points;
    r.n_gaps = masked_runs(scored).size();
    r.dtw = segment_dtw(dense, imputed, scored);
    return r;
}

// ---------------------------------------------------------------------------
// Distributional calibration

inline constexpr double kHistLow = 20.0;
inline constexpr double kHistHigh = 500.0;
inline constexpr double kHistBin = 5.0;
inline constexpr std::size_t kHistBins = 96;

struct CalibrationSummary {
    std::size_t n_points = 0;
    double truth_mean = 0.0;
    double truth_std = 0.0;
    double imputed_mean = 0.0;
    double imputed_std = 0.0;
    double delta = 0.0;  // imputed_mean - truth_mean
    std::array<std::size_t, kHistBins> truth_hist{};
    std::array<std::size_t, kHistBins> imputed_hist{};
};

/// Bin of a value on the 5 mg/dL grid over [20, 500); out-of-range values
/// land in the edge bins so every point is counted.
inline std::size_t hist_bin(double v) {
    if (!(v >= kHistLow)) return 0;
    const auto b = static_cast<std::size_t>((v - kHistLow) / kHistBin);
    return std::min(b, kHistBins - 1);
}

/// Accumulates calibration statistics across episodes.
class CalibrationAccumulator {
public:
    void add(double truth, double imputed) {
        y_.push_back(truth);
        yhat_.push_back(imputed);
    }

    /// Masked, truth-present indices of one episode whose (index, truth) pass the filter.
    void add_episode(const Episode& truth, const std::vector<double>& imputed, const Mask& mask,
                     const std::function<bool(std::size_t, double)>& in_regime) {
        for (auto t : scored_indices(truth, mask))
            if (in_regime(t, *truth.glucose[t])) add(*truth.glucose[t], imputed[t]);
    }

    std::size_t size() const noexcept { return y_.size(); }

    CalibrationSummary summary() const {
        if (y_.empty()) throw MetricDomainError("no masked points in the requested regime");
        CalibrationSummary s;
        s.n_points = y_.size();
        auto moments = [](const std::vector<double>& v) {
            double mean = 0.0;
            for (double x : v) mean += x;
            mean /= static_cast<double>(v.size());
            double var = 0.0;
            for (double x : v) var += (x - mean) * (x - mean);
            return std::pair{mean, std::sqrt(var / static_cast<double>(v.size()))};
        };
        std::tie(s.truth_mean, s.truth_std) = moments(y_);
        std::tie(s.imputed_mean, s.imputed_std) = moments(yhat_);
        s.delta = s.imputed_mean - s.truth_mean;
        for (double v : y_) ++s.truth_hist[hist_bin(v)];
        for (double v : yhat_) ++s.imputed_hist[hist_bin(v)];
        return s;
    }

private:
    std::vector<double> y_, yhat_;
};

inline CalibrationSummary calibration(const Episode& truth, const std::vector<double>& imputed, const Mask& mask,
                                      const std::function<bool(std::size_t, double)>& in_regime) {
    CalibrationAccumulator acc;
    acc.add_episode(truth, imputed, mask, in_regime);
    return acc.summary();
}

// ---------------------------------------------------------------------------
// Aggregation into result tables

struct GroupKey {
    std::string model;
    std::string protocol;
    std::string condition;
    friend auto operator<=>(const GroupKey&, const GroupKey&) = default;
};

struct EpisodeScore {
    GroupKey key;
    std::string patient_id;
    int episode_id = 0;
    MetricsReport metrics;
};

enum class Rank { none, best, second };

inline constexpr std::size_t kMetricCount = 5;
inline constexpr std::array<const char*, kMetricCount> kMetricNames = {"RMSE", "Bias", "EmpSE", "MARD", "DTW"};

struct TableRow {
    GroupKey key;
    std::size_t n_episodes = 0;
    MetricsReport mean;  // unweighted episode means; counts are totals
    std::array<Rank, kMetricCount> rank{};

    std::array<double, kMetricCount> values() const {
        return {mean.rmse, mean.bias, mean.emp_se, mean.mard, mean.dtw};
    }
};

/// Episode-unweighted means per (model, protocol, condition); within each
/// (protocol, condition) the best and second-best model is flagged per
/// metric (|bias| for Bias, lower is better everywhere).
inline std::vector<TableRow> aggregate(const std::vector<EpisodeScore>& scores) {
    std::map<GroupKey, TableRow> groups;
    for (const auto& s : scores) {
        auto& row = groups[s.key];
        row.key = s.key;
        ++row.n_episodes;
        row.mean.rmse += s.metrics.rmse;
        row.mean.bias += s.metrics.bias;
        row.mean.emp_se += s.metrics.emp_se;
        row.mean.mard += s.metrics.mard;
        row.mean.dtw += s.metrics.dtw;
        row.mean.n_points += s.metrics.n_points;
        row.mean.n_gaps += s.metrics.n_gaps;
    }
    std::vector<TableRow> rows;
    for (auto& [key, row] : groups) {
        const double n = static_cast<double>(row.n_episodes);
        row.mean.rmse /= n;
        row.mean.bias /= n;
        row.mean.emp_se /= n;
        row.mean.mard /= n;
        row.mean.dtw /= n;
        rows.push_back(row);
    }
    std::sort(rows.begin(), rows.end(), [](const TableRow& a, const TableRow& b) {
        return std::tie(a.key.protocol, a.key.condition, a.key.model) <
               std::tie(b.key.protocol, b.key.condition, b.key.model);
    });

    std::size_t i = 0;
    while (i < rows.size()) {
        std::size_t j = i;
        while (j < rows.size() && rows[j].key.protocol == rows[i].key.protocol &&
               rows[j].key.condition == rows[i].key.condition)
            ++j;
        for (std::size_t m = 0; m < kMetricCount; ++m) {
            auto score = [&](std::size_t r) {
                const double v = rows[r].values()[m];
                return m == 1 ? std::abs(v) : v;
            };
            std::vector<std::size_t> order;
            for (std::size_t r = i; r < j; ++r) order.push_back(r);
            std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return score(a) < score(b); });
            if (!order.empty()) rows[order[0]].rank[m] = Rank::best;
            if (order.size() > 1) rows[order[1]].rank[m] = Rank::second;
        }
        i = j;
    }
    return rows;
}

}  // namespace regime_bench
