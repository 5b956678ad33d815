#include <gtest/gtest.h>

#include <sstream>

#include <regime_bench/imputers.hpp>

#include "test_helpers.hpp"

using namespace regime_bench;
using testing_helpers::make_episode;
using testing_helpers::make_mask;
using testing_helpers::NA;

TEST(Mean, FillsWithRetainedMean) {
    const auto imp = impute_mean(make_episode({100, 150, 120}), make_mask({1, 0, 1}));
    EXPECT_EQ(imp.values, (std::vector<double>{100, 110, 120}));
    EXPECT_EQ(imp.method, "Mean");
}

TEST(Median, RobustToOutlier) {
    const auto imp = impute_median(make_episode({100, 100, 250, 400}), make_mask({1, 1, 0, 1}));
    EXPECT_EQ(imp.values[2], 100.0);
    const auto even = impute_median(make_episode({100, 120, 300}), make_mask({1, 1, 0}));
    EXPECT_EQ(even.values[2], 110.0);
}

TEST(Locf, CarriesForwardAndFallsBack) {
    EXPECT_EQ(impute_locf(make_episode({100, 1, 2, 130}), make_mask({1, 0, 0, 1})).values,
              (std::vector<double>{100, 100, 100, 130}));
    EXPECT_EQ(impute_locf(make_episode({5, 90}), make_mask({0, 1})).values, (std::vector<double>{90, 90}));
}

TEST(Lerp, ChordBetweenObservations) {
    EXPECT_EQ(impute_lerp(make_episode({100, 0, 0, 130}), make_mask({1, 0, 0, 1})).values,
              (std::vector<double>{100, 110, 120, 130}));
    EXPECT_EQ(impute_lerp(make_episode({100, 0, 110}), make_mask({1, 0, 1})).values[1], 105.0);
    // Edges take the nearest retained value.
    EXPECT_EQ(impute_lerp(make_episode({0, 90, 100, 0}), make_mask({0, 1, 1, 0})).values,
              (std::vector<double>{90, 90, 100, 100}));
}

TEST(Lerp, FlatChordUnderTriangle) {
    const auto ep = make_episode({100, 140, 180, 140, 100});
    const auto imp = impute_lerp(ep, make_mask({1, 0, 0, 0, 1}));
    EXPECT_EQ(*ep.glucose[2] - imp.values[2], 80.0);
}

TEST(Lerp, ExactOnAffineSegments) {
    std::vector<double> g;
    for (int i = 0; i < 96; ++i) g.push_back(80.0 + 0.25 * i);
    const auto ep = make_episode(g);
    std::vector<int> bits(96, 1);
    for (int i = 20; i < 33; ++i) bits[static_cast<std::size_t>(i)] = 0;
    for (int i = 60; i < 61; ++i) bits[static_cast<std::size_t>(i)] = 0;
    EXPECT_EQ(impute_lerp(ep, make_mask(bits)).values, g);
}

TEST(Imputers, IdentityOnRetainedAndErrors) {
    const auto ep = make_episode({100, NA, 120, 130, 90, 95});
    const auto mask = make_mask({1, 1, 0, 1, 0, 1});
    for (const auto& name : builtin_methods()) {
        const auto imp = impute(name, ep, mask);
        ASSERT_EQ(imp.values.size(), ep.size());
        for (std::size_t t = 0; t < ep.size(); ++t)
            if (mask.retained(t) && ep.observed(t)) {
                EXPECT_EQ(imp.values[t], *ep.glucose[t]);
            }
        for (double v : imp.values) EXPECT_TRUE(std::isfinite(v));
        EXPECT_THROW(impute(name, ep, make_mask({0, 0, 0, 0, 0, 0})), EmptyEpisodeError);
        const auto ident = impute(name, make_episode({100, 110}), make_mask({1, 1}));
        EXPECT_EQ(ident.values, (std::vector<double>{100, 110}));
    }
    EXPECT_THROW(impute("saits", ep, mask), ConfigError);
    // The sensor-missing sample at t=1 is filled like a masked one.
    EXPECT_EQ(impute_lerp(ep, mask).values[1], 110.0);
}

namespace {

std::string external_csv(double echo_shift, bool drop_second) {
    std::ostringstream s;
    s << "patient_id,episode_id,t,value,method\n";
    for (int e = 0; e < 2; ++e) {
        if (drop_second && e == 1) break;
        for (int t = 0; t < 4; ++t) {
            double v = 100.0 + 10.0 * t;
            if (t == 0) v += echo_shift;
            if (t == 1) v = 999.0;  // masked, free
            s << "p1," << e << ',' << t << ',' << v << ",SAITS\n";
        }
    }
    return s.str();
}

}  // namespace

TEST(LoadExternal, AcceptsEchoingFile) {
    const std::vector<Episode> eps = {make_episode({100, 110, 120, 130}, 0, "p1", 0),
                                      make_episode({100, 110, 120, 130}, 0, "p1", 1)};
    const std::vector<Mask> masks = {make_mask({1, 0, 1, 1}), make_mask({1, 0, 1, 1})};
    std::istringstream in(external_csv(0.0, false));
    const auto imps = load_external(in, eps, masks);
    ASSERT_EQ(imps.size(), 2u);
    EXPECT_EQ(imps[0].method, "SAITS");
    EXPECT_EQ(imps[1].values[1], 999.0);

    std::istringstream tiny(external_csv(5e-7, false));
    EXPECT_NO_THROW(load_external(tiny, eps, masks));
}

TEST(LoadExternal, IntegrityAndCoverage) {
    const std::vector<Episode> eps = {make_episode({100, 110, 120, 130}, 0, "p1", 0),
                                      make_episode({100, 110, 120, 130}, 0, "p1", 1)};
    const std::vector<Mask> masks = {make_mask({1, 0, 1, 1}), make_mask({1, 0, 1, 1})};
    std::istringstream altered(external_csv(1.0, false));
    EXPECT_THROW(load_external(altered, eps, masks), IntegrityError);

    std::istringstream partial(external_csv(0.0, true));
    try {
        load_external(partial, eps, masks);
        FAIL();
    } catch (const CoverageError& e) {
        EXPECT_NE(std::string(e.what()).find("p1/1"), std::string::npos);
    }

    std::istringstream stranger("patient_id,episode_id,t,value,method\nzz,0,0,1,X\n");
    EXPECT_THROW(load_external(stranger, eps, masks), CoverageError);
}

TEST(WriteImputations, RoundTripsThroughLoader) {
    const auto ep = make_episode({100, 110.125, 120, 130});
    const auto mask = make_mask({1, 0, 0, 1});
    std::ostringstream out;
    write_imputations_csv(out, {impute_lerp(ep, mask)});
    std::istringstream in(out.str());
    const auto back = load_external(in, {ep}, {mask});
    EXPECT_EQ(back[0].values, impute_lerp(ep, mask).values);
    EXPECT_EQ(back[0].method, "Lerp");
}
