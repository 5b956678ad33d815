#include <gtest/gtest.h>

#include <cmath>

#include <regime_bench/mask.hpp>
#include <regime_bench/synth.hpp>

#include "oracles.hpp"
#include "test_helpers.hpp"

using namespace regime_bench;
using testing_helpers::make_episode;
using testing_helpers::make_mask;

namespace {

MissingnessModel single_component(double w_exp, double w_gauss, double w_unif) {
    MissingnessModel m;
    for (auto* r : {&m.day, &m.night}) {
        r->mixture.k = 0.05;
        r->mixture.mu = 120.0;
        r->mixture.sigma = 1e-9;
        r->mixture.w_exp = w_exp;
        r->mixture.w_gauss = w_gauss;
        r->mixture.w_unif = w_unif;
    }
    return m;
}

double mean_duration(const MissingnessModel& m, int n) {
    Rng rng(11);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += sample_duration(m, Regime::day, rng);
    return sum / n;
}

}  // namespace

TEST(SampleDuration, UniformComponentMean) {
    const auto m = single_component(0, 0, 1);
    EXPECT_NEAR(mean_duration(m, 100000), 125.0, 2.0);
}

TEST(SampleDuration, PointMassGaussian) {
    const auto m = single_component(0, 1, 0);
    Rng rng(5);
    for (int i = 0; i < 1000; ++i) EXPECT_EQ(sample_duration(m, Regime::night, rng), 120);
}

TEST(SampleDuration, ExponentialMeanMatchesQuadrature) {
    const auto m = single_component(1, 0, 0);
    const double expected = oracle::truncated_exponential_mean(0.05, 10, 240);
    EXPECT_NEAR(mean_duration(m, 100000), expected, 0.02 * expected);
}

TEST(SampleDuration, GridAlignedAndBounded) {
    const auto m = reference_missingness_model();
    Rng rng(9);
    for (int i = 0; i < 20000; ++i) {
        const int d = sample_duration(m, i % 2 ? Regime::day : Regime::night, rng);
        EXPECT_EQ(d % 5, 0);
        EXPECT_GE(d, 10);
        EXPECT_LE(d, 240);
    }
}

TEST(TruncatedNormal, StaysInsideBoundsFromEitherTail) {
    Rng rng(1);
    for (int i = 0; i < 5000; ++i) {
        const double a = truncated_normal(rng, 300.0, 10.0, 10.0, 240.0);  // interval far below the mean
        EXPECT_GE(a, 10.0);
        EXPECT_LE(a, 240.0);
        const double b = truncated_normal(rng, -50.0, 5.0, 10.0, 240.0);
        EXPECT_GE(b, 10.0);
        EXPECT_LE(b, 240.0);
    }
}

TEST(NormQuantile, InvertsCdf) {
    for (double p : {1e-12, 1e-6, 0.01, 0.2, 0.5, 0.77, 0.99, 1 - 1e-9})
        EXPECT_NEAR(norm_cdf(norm_quantile(p)), p, 1e-14 + 1e-10 * p);
}

TEST(GenerateMask, ZeroOnsetMeansNoGaps) {
    MissingnessModel m;
    const auto mask = generate_mask(1000, 0, m, 42);
    EXPECT_EQ(mask.masked_count(), 0u);
}

TEST(GenerateMask, ForcedShortGapOncePerHour) {
    MissingnessModel m;
    for (auto& p : m.onset_prob) p = 1.0;
    m.day.pi_short = m.night.pi_short = 1.0;
    MaskTrace trace;
    const auto mask = generate_mask(288, 0, m, 7, &trace);
    EXPECT_EQ(mask.masked_count(), 24u);
    ASSERT_EQ(trace.events.size(), 24u);
    for (std::size_t i = 0; i < trace.events.size(); ++i) {
        EXPECT_EQ(trace.events[i].hour, static_cast<int>(i));
        EXPECT_EQ(trace.events[i].start_index / 12, i);
        EXPECT_EQ(trace.events[i].length, 1u);
    }
}

TEST(GenerateMask, OffsetStartStillWalksHours) {
    MissingnessModel m;
    for (auto& p : m.onset_prob) p = 1.0;
    m.day.pi_short = m.night.pi_short = 1.0;
    MaskTrace trace;
    generate_mask(30, 23 * 60 + 50, m, 7, &trace);  // 23:50 start: 2 samples of hour 23
    ASSERT_EQ(trace.events.size(), 4u);  // hours 23, 0, 1 and the partial hour 2
    EXPECT_EQ(trace.events[0].hour, 23);
    EXPECT_LT(trace.events[0].start_index, 2u);
    EXPECT_EQ(trace.events[1].hour, 0);
    EXPECT_GE(trace.events[1].start_index, 2u);
    EXPECT_EQ(trace.events[3].hour, 2);
    EXPECT_GE(trace.events[3].start_index, 26u);
}

TEST(GenerateMask, Deterministic) {
    const auto m = reference_missingness_model();
    for (std::uint64_t seed : {1ull, 99ull, 123456789ull}) {
        EXPECT_EQ(generate_mask(2880, 300, m, seed).bits, generate_mask(2880, 300, m, seed).bits);
    }
    EXPECT_NE(generate_mask(2880, 0, m, 1).bits, generate_mask(2880, 0, m, 2).bits);
}

TEST(GenerateMask, EventLengthsFollowDurations) {
    const auto m = reference_missingness_model();
    MaskTrace trace;
    const auto mask = generate_mask(288 * 200, 0, m, 77, &trace);
    ASSERT_FALSE(trace.events.empty());
    for (const auto& e : trace.events) {
        EXPECT_TRUE(e.duration == 5 || (e.duration >= 10 && e.duration <= 240));
        EXPECT_EQ(e.length, static_cast<std::size_t>((e.duration + 4) / 5));
        EXPECT_EQ(e.short_gap, e.duration == 5);
        for (std::size_t t = e.start_index; t < std::min(e.start_index + e.length, mask.size()); ++t)
            EXPECT_EQ(mask.bits[t], 0);
    }
}

TEST(GenerateMask, ClipsAtSequenceEnd) {
    MissingnessModel m = single_component(0, 1, 0);
    m.onset_prob.fill(1.0);
    for (std::size_t T : {1u, 3u, 13u}) {
        const auto mask = generate_mask(T, 0, m, 3);
        EXPECT_EQ(mask.size(), T);
    }
}

TEST(ApplyMask, HidesMaskedIndices) {
    const auto ep = make_episode({1, 2, 3, 4, 5, 6});
    EXPECT_EQ(apply_mask(ep, Mask::all_retained(6)).glucose, ep.glucose);
    const auto hidden = apply_mask(ep, make_mask({0, 0, 0, 0, 0, 0}));
    for (std::size_t t = 0; t < 6; ++t) EXPECT_FALSE(hidden.observed(t));
    const auto some = apply_mask(ep, make_mask({1, 1, 1, 0, 0, 1}));
    EXPECT_EQ(some.observed_flags(), (std::vector<std::uint8_t>{1, 1, 1, 0, 0, 1}));
    EXPECT_THROW(apply_mask(ep, make_mask({1})), DimensionError);
}

TEST(DeriveSeed, StableAndDistinct) {
    EXPECT_EQ(derive_seed(7, "p1", 0), derive_seed(7, "p1", 0));
    EXPECT_NE(derive_seed(7, "p1", 0), derive_seed(7, "p1", 1));
    EXPECT_NE(derive_seed(7, "p1", 0), derive_seed(7, "p2", 0));
    EXPECT_NE(derive_seed(7, "p1", 0), derive_seed(8, "p1", 0));
}
