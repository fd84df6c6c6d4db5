#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "fpmap/error.hpp"
#include "fpmap/radiomap.hpp"

using namespace fpmap;

namespace {

// Segment of n+1 points one second apart along +x with the given periodicities.
PathSegment segment(double t0, double x0, const std::vector<double>& periods, int level = 1) {
    PathSegment s;
    for (std::size_t i = 0; i <= periods.size(); ++i)
        s.points.push_back({t0 + static_cast<double>(i), x0 + static_cast<double>(i), 0.0, level});
    s.periodicities = periods;
    return s;
}

WifiScan scan(double t, int rss = -60) { return {t, {{"aa:bb:cc:dd:ee:01", rss}}}; }

RadioMapEntry entry(double x, int floor, int rss) {
    return {x, 0.5 * x, floor, {{"aa:bb:cc:dd:ee:01", rss}, {"aa:bb:cc:dd:ee:02", rss - 7}}, 21.5, x, 0};
}

}  // namespace

TEST_CASE("validity indicator") {
    QualityConfig cfg;
    CHECK(chi(0.5, cfg) == 1);
    CHECK(chi(1.5, cfg) == 0);
    CHECK(chi(0.4, cfg) == 1);
    CHECK(chi(1.0, cfg) == 1);
    CHECK(chi(0.39, cfg) == 0);
    CHECK_THROWS_AS(chi(0.0, cfg), ContractViolation);
}

TEST_CASE("segment belief") {
    QualityConfig cfg;
    auto bel = [&](std::vector<double> t) { return segment_belief(std::span<const double>(t), cfg); };
    CHECK(*bel({0.5, 0.6, 0.5, 0.6}) == doctest::Approx(20.0));
    // ratio 1.6 / 3.1, population std of {0.5, 0.6, 0.5}
    const double sd = std::sqrt(((0.5 - 1.6 / 3) * (0.5 - 1.6 / 3) * 2 + (0.6 - 1.6 / 3) * (0.6 - 1.6 / 3)) / 3);
    CHECK(*bel({0.5, 1.5, 0.6, 0.5}) == doctest::Approx(1.6 / 3.1 / sd));
    CHECK(*bel({0.5, 1.5, 0.6, 0.5}) == doctest::Approx(10.95).epsilon(1e-3));
    CHECK(*bel({0.5, 0.5, 0.5, 0.5}) == doctest::Approx(200.0));
    CHECK(*bel({1.5, 2.0, 3.0}) == 0.0);
    CHECK_FALSE(bel({0.5}).has_value());
    CHECK_FALSE(bel({}).has_value());
    // Permutation invariance.
    CHECK(*bel({0.6, 0.5, 0.7, 0.45, 1.2}) == doctest::Approx(*bel({1.2, 0.45, 0.5, 0.7, 0.6})));
}

TEST_CASE("reference point interpolation") {
    CHECK(interpolate_rp(1, {0, 0, 0, 1}, {2, 2, 0, 1}).x == doctest::Approx(1.0));
    const auto e = interpolate_rp(3, {3, 5, 6, 1}, {4, 9, 9, 1});
    CHECK(e.x == 5.0);
    CHECK(e.y == 6.0);
    const auto d = interpolate_rp(11, {10, 0, 0, 1}, {14, 4, 8, 1});
    CHECK(d.x == doctest::Approx(1.0));
    CHECK(d.y == doctest::Approx(2.0));
    const auto same = interpolate_rp(2, {2, 1, 1, 1}, {2, 1, 1, 1});
    CHECK(same.x == 1.0);
    CHECK_THROWS_AS(interpolate_rp(5, {0, 0, 0, 1}, {2, 2, 0, 1}), ContractViolation);
    CHECK_THROWS_AS(interpolate_rp(-1, {0, 0, 0, 1}, {2, 2, 0, 1}), ContractViolation);
}

TEST_CASE("radio map construction") {
    QualityConfig cfg;
    Trajectory traj;
    traj.segments.push_back(segment(0, 0, {0.5, 0.6, 0.5, 0.6}));                // bel 20
    traj.segments.push_back(segment(4.5, 10, {0.5, 0.6, 0.6, 0.5, 0.9, 0.4}));  // below 15

    const double bel2 = *segment_belief(traj.segments[1], cfg);
    REQUIRE(bel2 < 15);

    SUBCASE("only the good segment survives") {
        std::vector<WifiScan> scans = {scan(0.5), scan(1.5), scan(3.25), scan(5.0), scan(6.0), scan(8.0)};
        BuildReport rep;
        const auto map = build_radio_map(traj, scans, cfg, &rep);
        REQUIRE(map.entries.size() == 3);
        CHECK(map.entries[0].x == doctest::Approx(0.5));
        CHECK(map.entries[2].x == doctest::Approx(3.25));
        for (const auto& e : map.entries) {
            CHECK(e.segment == 0);
            CHECK(e.belief == doctest::Approx(20.0));
        }
        REQUIRE(rep.segments.size() == 2);
        CHECK(rep.segments[0].accepted == 3);
        CHECK(rep.segments[1].scans == 3);
        CHECK(rep.segments[1].accepted == 0);
    }
    SUBCASE("everything below threshold") {
        cfg.belief_threshold = 50;
        std::vector<WifiScan> scans = {scan(0.5), scan(5.0)};
        CHECK(build_radio_map(traj, scans, cfg).empty());
    }
    SUBCASE("scan on a pose timestamp") {
        std::vector<WifiScan> scans = {scan(2.0)};
        const auto map = build_radio_map(traj, scans, cfg);
        REQUIRE(map.entries.size() == 1);
        CHECK(map.entries[0].x == 2.0);
    }
    SUBCASE("scans across a snap or outside the walk are dropped") {
        std::vector<WifiScan> scans = {scan(-1.0), scan(4.2), scan(99.0)};
        BuildReport rep;
        CHECK(build_radio_map(traj, scans, cfg, &rep).empty());
        CHECK(rep.dropped_outside == 3);
    }
    SUBCASE("no scans warns") {
        BuildReport rep;
        CHECK(build_radio_map(traj, {}, cfg, &rep).empty());
        CHECK_FALSE(rep.warnings.empty());
    }
    SUBCASE("unordered scans") {
        std::vector<WifiScan> scans = {scan(2.0), scan(1.0)};
        CHECK_THROWS_AS(build_radio_map(traj, scans, cfg), ValidationError);
    }
    SUBCASE("belief ceiling keeps only the weak segment") {
        cfg.belief_threshold = 1e-6;
        cfg.belief_ceiling = 15.0;
        std::vector<WifiScan> scans = {scan(0.5), scan(5.0), scan(6.0)};
        const auto map = build_radio_map(traj, scans, cfg);
        REQUIRE(map.entries.size() == 2);
        CHECK(map.entries[0].segment == 1);
    }
    SUBCASE("entry count never grows with the threshold") {
        std::vector<WifiScan> scans;
        for (double t = 0.1; t < 10; t += 0.3) scans.push_back(scan(t));
        std::size_t prev = std::numeric_limits<std::size_t>::max();
        for (double eps : {0.001, 5.0, 10.0, 15.0, 18.0, 19.99, 20.0, 25.0}) {
            cfg.belief_threshold = eps;
            const auto n = build_radio_map(traj, scans, cfg).entries.size();
            CHECK(n <= prev);
            prev = n;
        }
    }
}

TEST_CASE("empty trajectory gives an empty map with a warning") {
    BuildReport rep;
    std::vector<WifiScan> scans = {scan(1.0)};
    CHECK(build_radio_map(Trajectory{}, scans, QualityConfig{}, &rep).empty());
    CHECK_FALSE(rep.warnings.empty());
}

TEST_CASE("radio map persistence") {
    SUBCASE("empty map") {
        RadioMap m;
        CHECK(parse_radio_map(dump_radio_map(m)) == m);
    }
    SUBCASE("hundred entries") {
        RadioMap m;
        m.config = {{"belief_threshold", 15.0}, {"t_min", 0.4}};
        for (int i = 0; i < 100; ++i) m.entries.push_back(entry(i * 0.37, 1 + i % 2, -40 - i % 50));
        CHECK(parse_radio_map(dump_radio_map(m)) == m);

        const auto path = std::filesystem::temp_directory_path() / "fpmap_unit_map.json";
        save_radio_map(m, path);
        CHECK(load_radio_map(path) == m);
        std::filesystem::remove(path);
    }
    SUBCASE("unknown field is named") {
        try {
            parse_radio_map(R"({"version":1,"config":{},"entries":[],"colour":"red"})");
            FAIL("expected a schema error");
        } catch (const SchemaError& e) {
            CHECK(std::string(e.what()).find("colour") != std::string::npos);
        }
    }
    SUBCASE("wrong version") {
        CHECK_THROWS_AS(parse_radio_map(R"({"version":2,"config":{},"entries":[]})"), SchemaError);
    }
}

TEST_CASE("merging keeps scan-time order") {
    RadioMap a, b;
    a.entries = {entry(1, 1, -50), entry(3, 1, -50)};
    b.entries = {entry(2, 1, -50), entry(3, 2, -50)};
    const RadioMap both[] = {a, b};
    const auto m = merge_radio_maps(both);
    REQUIRE(m.entries.size() == 4);
    CHECK(m.entries[1].t == 2);
    CHECK(m.entries[2].floor == 1);
    CHECK(m.entries[3].floor == 2);
}

TEST_CASE("quality config validation") {
    QualityConfig cfg;
    cfg.t_min = 1.2;
    CHECK_THROWS(cfg.validate());
}
