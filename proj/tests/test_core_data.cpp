#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include <regime_bench/core_data.hpp>

#include "test_helpers.hpp"

using namespace regime_bench;
using testing_helpers::make_episode;
using testing_helpers::make_mask;
using testing_helpers::NA;

namespace {

std::vector<Episode> ingest_string(const std::string& text, int gap, bool split_days = false) {
    std::istringstream in(text);
    return ingest_csv(in, IngestOptions{gap, split_days});
}

const char* kHeader = "patient_id,timestamp,glucose,carbs,bolus,basal\n";

}  // namespace

TEST(Ingest, SplitsWhenReadingsExceedPartitionGap) {
    const auto eps = ingest_string(std::string(kHeader) + "p,0,100,,,\np,250,110,,,\n", 240);
    ASSERT_EQ(eps.size(), 2u);
    EXPECT_EQ(eps[0].size(), 1u);
    EXPECT_EQ(eps[1].start_minute, 250);
}

TEST(Ingest, DenseDayIsOneEpisode) {
    std::string csv = kHeader;
    for (int t = 0; t < 288; ++t) csv += "p," + std::to_string(t * 5) + ",120,0,0,0.8\n";
    const auto eps = ingest_string(csv, 30);
    ASSERT_EQ(eps.size(), 1u);
    EXPECT_EQ(eps[0].size(), 288u);
    EXPECT_TRUE(eps[0].fully_observed());
}

TEST(Ingest, ThirtyMinuteThreshold) {
    const auto eps = ingest_string(std::string(kHeader) + "p,0,100,,,\np,5,101,,,\np,10,102,,,\np,50,103,,,\n", 30);
    ASSERT_EQ(eps.size(), 2u);
    EXPECT_EQ(eps[0].size(), 3u);
    EXPECT_EQ(eps[1].size(), 1u);
    EXPECT_EQ(eps[1].start_minute, 50);
    EXPECT_EQ(eps[1].episode_id, 1);
}

TEST(Ingest, GapAtThresholdStaysInOneEpisode) {
    const auto eps = ingest_string(std::string(kHeader) + "p,0,100,,,\np,30,110,,,\n", 30);
    ASSERT_EQ(eps.size(), 1u);
    EXPECT_EQ(eps[0].size(), 7u);
    EXPECT_FALSE(eps[0].observed(3));
}

TEST(Ingest, SnapsToNearestGridPointAndLaterReadingWins) {
    const auto eps = ingest_string(std::string(kHeader) + "p,0,100,,,\np,7,110,,,\np,8,111,,,\n", 30);
    ASSERT_EQ(eps.size(), 1u);
    ASSERT_EQ(eps[0].size(), 3u);  // 0, 5 (7 -> 5), 10 (8 -> 10)
    EXPECT_EQ(*eps[0].glucose[1], 110);
    EXPECT_EQ(*eps[0].glucose[2], 111);

    const auto same = ingest_string(std::string(kHeader) + "p,0,100,,,\np,1,105,,,\n", 30);
    ASSERT_EQ(same[0].size(), 1u);
    EXPECT_EQ(*same[0].glucose[0], 105);
}

TEST(Ingest, ExogenousZeroFilledAndEventsKept) {
    const auto eps = ingest_string(std::string(kHeader) + "p,0,100,,,1.0\np,5,,45,3,\np,10,120,,,\n", 30);
    ASSERT_EQ(eps.size(), 1u);
    EXPECT_FALSE(eps[0].observed(1));
    EXPECT_EQ(eps[0].exog[1][0], 45);
    EXPECT_EQ(eps[0].exog[1][1], 3);
    EXPECT_EQ(eps[0].exog[1][2], 0);
    EXPECT_EQ(eps[0].exog[0][2], 1.0);
    EXPECT_EQ(eps[0].exog[2][0], 0);
}

TEST(Ingest, IsoTimestamps) {
    const auto eps = ingest_string(std::string(kHeader) + "p,2024-01-01T06:00:00,100,,,\np,2024-01-01 06:05,101,,,\n", 30);
    ASSERT_EQ(eps.size(), 1u);
    EXPECT_EQ(eps[0].size(), 2u);
    EXPECT_EQ(eps[0].start_time_of_day(), 360);
    EXPECT_EQ(eps[0].start_minute, 19723LL * 1440 + 360);
}

TEST(Ingest, SplitDaysBreaksAtMidnight) {
    std::string csv = kHeader;
    for (int t = 1430; t <= 1450; t += 5) csv += "p," + std::to_string(t) + ",100,,,\n";
    EXPECT_EQ(ingest_string(csv, 30).size(), 1u);
    EXPECT_EQ(ingest_string(csv, 30, true).size(), 2u);
}

TEST(Ingest, MalformedRowReportsLine) {
    try {
        ingest_string(std::string(kHeader) + "p,0,100,,,\np,5,abc,,,\n", 30);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
    EXPECT_THROW(ingest_string(std::string(kHeader) + "p,0,100,,\n", 30), ParseError);
    EXPECT_THROW(ingest_string("patient_id,timestamp\n", 30), ParseError);
    EXPECT_THROW(ingest_string(std::string(kHeader) + "p,0,600,,,\n", 30), ParseError);
}

TEST(Ingest, NonMonotoneTimestampsRejected) {
    EXPECT_THROW(ingest_string(std::string(kHeader) + "p,10,100,,,\np,5,100,,,\n", 30), OrderingError);
    // Interleaved patients are fine as long as each is monotone.
    EXPECT_NO_THROW(ingest_string(std::string(kHeader) + "a,10,100,,,\nb,5,100,,,\na,15,100,,,\n", 30));
}

TEST(Ingest, PartitionInvariantHolds) {
    std::string csv = kHeader;
    int t = 0;
    for (int i = 0; i < 200; ++i) {
        t += 5 * (1 + (i * 7919) % 11);  // gaps of 5..55 minutes
        csv += "p," + std::to_string(t) + ",100,,,\n";
    }
    const auto eps = ingest_string(csv, 30);
    for (const auto& ep : eps) {
        std::optional<std::size_t> last;
        for (std::size_t i = 0; i < ep.size(); ++i)
            if (ep.observed(i)) {
                if (last) {
                    EXPECT_LE((i - *last) * 5, 30u);
                }
                last = i;
            }
    }
    for (std::size_t e = 1; e < eps.size(); ++e) {
        const auto prev_end = eps[e - 1].start_minute + static_cast<std::int64_t>(eps[e - 1].size() - 1) * 5;
        EXPECT_GT(eps[e].start_minute - prev_end, 30);
    }
}

TEST(Ingest, ResamplingIsIdempotent) {
    const std::string raw = std::string(kHeader) +
                            "b,3,100,,,0.5\nb,9,101,10,1,\nb,21,,,,\nb,31,104,,2,0.7\nb,400,99,,,\n"
                            "a,2024-03-01T10:02,140.25,,,\na,2024-03-01T10:13,141,,,\n";
    const auto first = ingest_string(raw, 30);
    std::ostringstream out;
    write_cgm_csv(out, first);
    const auto second = ingest_string(out.str(), 30);
    ASSERT_EQ(first.size(), second.size());
    for (std::size_t e = 0; e < first.size(); ++e) {
        EXPECT_EQ(first[e].patient_id, second[e].patient_id);
        EXPECT_EQ(first[e].episode_id, second[e].episode_id);
        EXPECT_EQ(first[e].start_minute, second[e].start_minute);
        EXPECT_EQ(first[e].glucose, second[e].glucose);
        EXPECT_EQ(first[e].exog, second[e].exog);
    }
}

TEST(LinearFill, InterpolatesInterior) {
    const auto out = linear_fill(make_episode({100, NA, NA, 130}));
    EXPECT_EQ(out.dense_glucose(), (std::vector<double>{100, 110, 120, 130}));
}

TEST(LinearFill, IdentityOnFullyObserved) {
    const auto ep = make_episode({101.5, 99.25, 140});
    EXPECT_EQ(linear_fill(ep).glucose, ep.glucose);
}

TEST(LinearFill, TrimsEdges) {
    const auto out = linear_fill(make_episode({NA, 90, NA, 90, NA}, 100));
    EXPECT_EQ(out.dense_glucose(), (std::vector<double>{90, 90, 90}));
    EXPECT_EQ(out.start_minute, 105);
}

TEST(LinearFill, PreservesObservedValuesBitExactly) {
    const std::vector<double> g = {100.1, NA, 133.3, NA, NA, NA, 87.77, 91.0000001};
    const auto out = linear_fill(make_episode(g));
    for (std::size_t t = 0; t < g.size(); ++t)
        if (g[t] == g[t]) {
            EXPECT_EQ(*out.glucose[t], g[t]);
        }
}

TEST(LinearFill, EmptyEpisodeThrows) {
    EXPECT_THROW(linear_fill(make_episode({NA, NA})), EmptyEpisodeError);
}

TEST(TimeEncoding, QuarterPoints) {
    auto e0 = time_encoding(0);
    EXPECT_NEAR(e0.sin_component, 0.0, 1e-12);
    EXPECT_NEAR(e0.cos_component, 1.0, 1e-12);
    auto e72 = time_encoding(72);
    EXPECT_NEAR(e72.sin_component, 1.0, 1e-12);
    EXPECT_NEAR(e72.cos_component, 0.0, 1e-12);
    auto e144 = time_encoding(144);
    EXPECT_NEAR(e144.sin_component, 0.0, 1e-12);
    EXPECT_NEAR(e144.cos_component, -1.0, 1e-12);
}

TEST(TimeEncoding, UsesAbsoluteTimeOfDay) {
    const auto e = time_encoding(0, 360);  // episode starting 06:00
    EXPECT_NEAR(e.sin_component, 1.0, 1e-12);
}

TEST(TimeEncoding, PeriodAndUnitNorm) {
    for (std::int64_t t = 0; t < 2000; t += 7) {
        const auto a = time_encoding(t, 35);
        const auto b = time_encoding(t + 288, 35);
        EXPECT_NEAR(a.sin_component, b.sin_component, 1e-12);
        EXPECT_NEAR(a.cos_component, b.cos_component, 1e-12);
        EXPECT_NEAR(a.sin_component * a.sin_component + a.cos_component * a.cos_component, 1.0, 1e-12);
    }
}

TEST(BuildInputs, SubstitutesChannels) {
    auto ep = make_episode({120, 120});
    ep.exog[0] = {0, 0, 0.8};
    const auto x = build_inputs(ep, make_mask({1, 0}));
    EXPECT_EQ(x[0].masked_glucose, 120);
    EXPECT_EQ(x[0].exog[2], 0.8);
    EXPECT_NEAR(x[0].encoding.sin_component, 0.0, 1e-12);
    EXPECT_NEAR(x[0].encoding.cos_component, 1.0, 1e-12);
    EXPECT_EQ(x[1].masked_glucose, 0.0);
}

TEST(BuildInputs, IdentityMaskKeepsGlucose) {
    const auto ep = make_episode({80, 95.5, 130});
    const auto x = build_inputs(ep, Mask::all_retained(3));
    for (std::size_t t = 0; t < 3; ++t) EXPECT_EQ(x[t].masked_glucose, *ep.glucose[t]);
}

TEST(BuildInputs, LengthMismatchAndMissingRetained) {
    EXPECT_THROW(build_inputs(make_episode({1, 2}), make_mask({1})), DimensionError);
    EXPECT_THROW(build_inputs(make_episode({100, NA}), make_mask({1, 1})), DimensionError);
    EXPECT_NO_THROW(build_inputs(make_episode({100, NA}), make_mask({1, 0})));
}

TEST(BuildInputs, CsvLayout) {
    std::ostringstream out;
    write_inputs_csv(out, build_inputs(make_episode({120}), Mask::all_retained(1)));
    EXPECT_EQ(out.str(), "t,masked_glucose,carbs,bolus,basal,sin_t,cos_t\n0,120,0,0,0,0,1\n");
}
