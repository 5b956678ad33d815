#include <gtest/gtest.h>

#include <sstream>

#include <regime_bench/io.hpp>
#include <regime_bench/synth.hpp>

using namespace regime_bench;

TEST(ModelJson, RoundTripIsBitExact) {
    auto m = reference_missingness_model();
    m.onset_prob[5] = 0.1 + 0.2;  // not representable in short decimal form
    m.day.mixture.mu = 120.00000000000001;
    const auto text = io::to_json(m).dump(2);
    const auto back = io::model_from_json(io::json::parse(text));
    EXPECT_EQ(back.onset_prob, m.onset_prob);
    for (auto [a, b] : {std::pair{&m.day, &back.day}, std::pair{&m.night, &back.night}}) {
        EXPECT_EQ(a->pi_short, b->pi_short);
        EXPECT_EQ(a->mixture.A, b->mixture.A);
        EXPECT_EQ(a->mixture.k, b->mixture.k);
        EXPECT_EQ(a->mixture.B, b->mixture.B);
        EXPECT_EQ(a->mixture.mu, b->mixture.mu);
        EXPECT_EQ(a->mixture.sigma, b->mixture.sigma);
        EXPECT_EQ(a->mixture.gamma, b->mixture.gamma);
        EXPECT_EQ(a->mixture.w_exp, b->mixture.w_exp);
    }
    EXPECT_EQ(io::to_json(back).dump(2), text);
}

TEST(ModelJson, RejectsInvalid) {
    auto j = io::to_json(reference_missingness_model());
    j["onset_prob"][0] = 1.5;
    EXPECT_THROW(io::model_from_json(j), ConfigError);
    auto k = io::to_json(reference_missingness_model());
    k.erase("day");
    EXPECT_THROW(io::model_from_json(k), ConfigError);
}

TEST(MaskJson, RoundTrip) {
    io::MaskRecord r{"p1", 3, mask_from_runs(50, {{0, 2}, {10, 5}, {48, 2}})};
    r.mask.seed = 42;
    r.mask.provenance = Provenance::protocol_B;
    r.mask.condition = "n_peaks=1";
    const auto back = io::masks_from_json(io::json::parse(io::masks_to_json({r}).dump()));
    ASSERT_EQ(back.size(), 1u);
    EXPECT_EQ(back[0].patient_id, "p1");
    EXPECT_EQ(back[0].episode_id, 3);
    EXPECT_EQ(back[0].mask.bits, r.mask.bits);
    EXPECT_EQ(back[0].mask.seed, 42u);
    EXPECT_EQ(back[0].mask.provenance, Provenance::protocol_B);
    EXPECT_EQ(back[0].mask.condition, "n_peaks=1");

    auto bad = io::masks_to_json({r});
    bad[0]["gaps"][0]["start_index"] = 49;
    EXPECT_THROW(io::masks_from_json(bad), ConfigError);
}

TEST(WindowsJson, RoundTrip) {
    RegimeWindow w;
    w.protocol = Protocol::B;
    w.patient_id = "p2";
    w.episode_id = 1;
    w.start_index = 10;
    w.end_index = 55;
    w.anchor_index = 30;
    w.meal_event = MealEvent{8, 45.0};
    w.masked_length = 45;
    const auto back = io::windows_from_json(io::windows_to_json({w}));
    ASSERT_EQ(back.size(), 1u);
    EXPECT_EQ(back[0].protocol, Protocol::B);
    EXPECT_EQ(back[0].end_index, 55u);
    EXPECT_EQ(*back[0].anchor_index, 30u);
    EXPECT_EQ(back[0].meal_event->index, 8u);
    EXPECT_EQ(back[0].masked_length, 45u);
}

TEST(TcrCsv, RoundTrip) {
    std::vector<TcrInterval> tcr = {{"a", 0, 114, 162}, {"b", 2, 0, 48}};
    std::ostringstream out;
    io::write_tcr_csv(out, tcr);
    std::istringstream in(out.str());
    const auto back = io::read_tcr_csv(in);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[1].patient_id, "b");
    EXPECT_EQ(back[1].episode_id, 2);
    EXPECT_EQ(back[0].start_index, 114u);
    EXPECT_EQ(back[0].end_index, 162u);
}

TEST(Report, RoundTripAndTable) {
    EpisodeScore a;
    a.key = {"Lerp", "A", "ratio=0.1"};
    a.patient_id = "p1";
    a.metrics.rmse = 1.5;
    a.metrics.bias = -0.25;
    a.metrics.n_points = 29;
    EpisodeScore b = a;
    b.key.model = "Mean";
    b.metrics.rmse = 9.0;
    const std::vector<EpisodeScore> scores = {a, b};
    const auto table = aggregate(scores);
    const auto j = io::report_to_json(scores, table);
    const auto back = io::scores_from_report(j);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].key, a.key);
    EXPECT_EQ(back[0].metrics.rmse, 1.5);
    EXPECT_EQ(back[0].metrics.n_points, 29u);
    const auto text = io::render_table(table);
    EXPECT_NE(text.find("Lerp"), std::string::npos);
    EXPECT_NE(text.find('*'), std::string::npos);
}
