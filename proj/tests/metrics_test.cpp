#include <efr/metrics.hpp>
#include <efr/synth.hpp>

#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include <random>
#include <sstream>

namespace {

using efr::Event;
using efr::Label;
using efr::LabeledEvent;
using efr::Polarity;
using efr::TimeWindow;

std::vector<LabeledEvent> labeled(std::size_t fg, std::size_t fl, double t = 0.5) {
    std::vector<LabeledEvent> out;
    for (std::size_t i = 0; i < fg; ++i) out.push_back({{t, 0, 0, Polarity::positive}, Label::foreground});
    for (std::size_t i = 0; i < fl; ++i) out.push_back({{t, 1, 0, Polarity::negative}, Label::flicker});
    return out;
}

TEST(Snr, CountRatio) {
    const auto r = efr::snr(labeled(100, 400), {0.0, 1.0});
    EXPECT_EQ(r.foreground_count, 100u);
    EXPECT_EQ(r.flicker_count, 400u);
    ASSERT_TRUE(r.snr);
    EXPECT_DOUBLE_EQ(*r.snr, 0.25);
}

TEST(Snr, UndefinedWithoutFlicker) {
    const auto r = efr::snr(labeled(10, 0), {0.0, 1.0});
    EXPECT_FALSE(r.snr.has_value());
    EXPECT_THROW(efr::snr_improvement(r, r), efr::Error);
    EXPECT_THROW(efr::snr(labeled(1, 1), {1.0, 1.0}), efr::Error);
}

TEST(Snr, WindowIsHalfOpen) {
    auto ev = labeled(1, 1, 0.0);
    const auto late = labeled(1, 1, 1.0);
    ev.insert(ev.end(), late.begin(), late.end());
    const auto r = efr::snr(ev, {0.0, 1.0});
    EXPECT_EQ(r.foreground_count + r.flicker_count, 2u);
}

TEST(SnrImprovement, RelativeChangeArithmetic) {
    EXPECT_NEAR(efr::snr_improvement(0.19, 1.07), 4.63, 0.01);
    EXPECT_NEAR(efr::snr_improvement(0.24, 2.08), 7.67, 0.01);
    const auto r = efr::snr(labeled(3, 7), {0.0, 1.0});
    EXPECT_DOUBLE_EQ(efr::snr_improvement(r, r), 0.0);
    EXPECT_THROW(efr::snr_improvement(0.0, 1.0), efr::Error);
}

TEST(Snr, MaskMatchesLabelsWhenForegroundAvoidsRegion) {
    const auto scene = efr::default_scene({64, 64}, 1.0, 4);
    const auto out = efr::generate(scene);
    const auto lab = out.labeled();
    const TimeWindow w{0.1, 0.9};
    const auto by_label = efr::snr(lab, w);
    const auto by_mask = efr::snr(out.events, scene.flicker.region, w);
    EXPECT_EQ(by_label.foreground_count, by_mask.foreground_count);
    EXPECT_EQ(by_label.flicker_count, by_mask.flicker_count);
}

TEST(SnrReport, RecordIsSingleLineJson) {
    const auto r = efr::snr(labeled(100, 400), {0.25, 1.5});
    const auto rec = r.to_record();
    EXPECT_EQ(rec.find('\n'), std::string::npos);
    const auto j = nlohmann::json::parse(rec);
    EXPECT_EQ(j.at("foreground_count"), 100);
    EXPECT_EQ(j.at("flicker_count"), 400);
    EXPECT_DOUBLE_EQ(j.at("snr").get<double>(), 0.25);
    EXPECT_DOUBLE_EQ(j.at("t_start").get<double>(), 0.25);
    EXPECT_TRUE(nlohmann::json::parse(efr::snr(labeled(1, 0), {0, 1}).to_record()).at("snr").is_null());
}

TEST(RateMap, CountsPerSecond) {
    const std::vector<Event> ev{{0.001, 2, 3, Polarity::positive},
                                {0.010, 2, 3, Polarity::negative},
                                {0.029, 2, 3, Polarity::positive},
                                {0.030, 2, 3, Polarity::positive}};
    const auto m = efr::rate_map(ev, {5, 5}, 0.0, 0.03);
    EXPECT_NEAR(m.at(2, 3), 100.0, 1e-9);
    EXPECT_EQ(m.at(0, 0), 0.0);
    EXPECT_EQ(m.argmax(), (std::pair<std::uint32_t, std::uint32_t>{2, 3}));
}

TEST(RateMap, EmptyWindowIsZero) {
    const std::vector<Event> ev{{5.0, 0, 0, Polarity::positive}};
    const auto m = efr::rate_map(ev, {3, 2}, 0.0);
    EXPECT_EQ(m.rates.size(), 6u);
    EXPECT_EQ(m.max(), 0.0);
    EXPECT_THROW(efr::rate_map(ev, {3, 2}, 0.0, 0.0), efr::Error);
}

TEST(RateMap, TotalMatchesWindowCount) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> t(0.0, 1.0);
    std::uniform_int_distribution<std::uint32_t> xy(0, 7);
    std::vector<Event> ev(5000);
    for (auto& e : ev) e = {t(rng), xy(rng), xy(rng), Polarity::positive};
    const auto m = efr::rate_map(ev, {8, 8}, 0.4, 0.05);
    double total = 0.0;
    for (double r : m.rates) total += r * m.duration;
    const auto in_window = std::count_if(ev.begin(), ev.end(), [](const Event& e) { return e.t >= 0.4 && e.t < 0.45; });
    EXPECT_NEAR(total, static_cast<double>(in_window), 1e-6);
}

TEST(RateMap, TimeShiftInvariant) {
    std::vector<Event> ev{{0.1, 1, 1, Polarity::positive}, {0.11, 0, 1, Polarity::negative}};
    const auto a = efr::rate_map(ev, {2, 2}, 0.1, 0.03);
    for (auto& e : ev) e.t += 2.0;
    const auto b = efr::rate_map(ev, {2, 2}, 2.1, 0.03);
    EXPECT_EQ(a.rates, b.rates);
}

TEST(RateMap, DefaultSceneHotspotInsideFlickerRegion) {
    const auto scene = efr::default_scene({64, 64}, 0.5, 2);
    const auto out = efr::generate(scene);
    const auto m = efr::rate_map(out.events, scene.geometry, 0.2);
    const auto [x, y] = m.argmax();
    EXPECT_TRUE(scene.flicker.region.contains(x, y));
}

TEST(RateMap, PgmAndCsvOutput) {
    const std::vector<Event> ev{{0.0, 0, 0, Polarity::positive}, {0.0, 0, 0, Polarity::positive},
                                {0.0, 1, 0, Polarity::positive}};
    const auto m = efr::rate_map(ev, {2, 1}, 0.0, 0.03);
    std::ostringstream pgm;
    efr::write_rate_map_pgm(pgm, m, "window 0 0.03");
    const std::string s = pgm.str();
    const std::string header = "P5\n# window 0 0.03\n2 1\n255\n";
    ASSERT_EQ(s.size(), header.size() + 2);
    EXPECT_EQ(s.substr(0, header.size()), header);
    EXPECT_EQ(static_cast<unsigned char>(s[header.size()]), 255);
    EXPECT_NEAR(static_cast<unsigned char>(s[header.size() + 1]), 127.5, 0.5);

    std::ostringstream csv;
    efr::write_rate_map_csv(csv, m);
    std::istringstream in(csv.str());
    double a = 0.0, b = 0.0;
    char comma = 0;
    in >> a >> comma >> b;
    EXPECT_NEAR(a, 2.0 / 0.03, 1e-6);
    EXPECT_NEAR(b, 1.0 / 0.03, 1e-6);
}

}  // namespace
