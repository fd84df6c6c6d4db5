#include <doctest.h>

#include <cmath>
#include <sstream>

#include "fpmap/error.hpp"
#include "fpmap/localization.hpp"

using namespace fpmap;

namespace {

std::shared_ptr<const ApUniverse> universe(std::initializer_list<std::string> macs) {
    return std::make_shared<const ApUniverse>(macs);
}

FingerprintVector vec(std::shared_ptr<const ApUniverse> u, std::vector<double> values) {
    return {std::move(u), std::move(values), -90, -101};
}

RadioMapEntry at(double x, double y, int floor, Fingerprint fp) { return {x, y, floor, std::move(fp), 20, x, 0}; }

const std::string A = "aa:00:00:00:00:01";
const std::string B = "aa:00:00:00:00:02";
const std::string C = "aa:00:00:00:00:03";

RadioMap three_entry_map() {
    RadioMap m;
    m.entries = {at(0, 0, 1, {{A, -40}, {B, -70}}), at(5, 0, 1, {{A, -55}, {B, -55}}),
                 at(10, 0, 2, {{A, -70}, {B, -40}, {C, -80}})};
    return m;
}

}  // namespace

TEST_CASE("positive fingerprint") {
    const auto u = universe({A, B, C});
    const auto v = to_positive({{A, -60}, {B, -93}}, u, -90, -96);
    REQUIRE(v.values.size() == 3);
    CHECK(v.values[0] == 36);
    CHECK(v.values[1] == 0);  // below tau
    CHECK(v.values[2] == 0);  // absent
    // APs outside the universe are ignored.
    CHECK(to_positive({{"ff:ff:ff:ff:ff:ff", -30}}, u, -90, -96).values == std::vector<double>{0, 0, 0});
    // tau itself is kept.
    CHECK(to_positive({{A, -90}}, u, -90, -96).values[0] == 6);
}

TEST_CASE("euclidean distance") {
    const auto u2 = universe({A, B});
    const auto u3 = universe({A, B, C});
    CHECK(euclidean(vec(u2, {3, 4}), vec(u2, {3, 4})) == 0.0);
    CHECK(euclidean(vec(u2, {3, 0}), vec(u2, {0, 4})) == doctest::Approx(5.0));
    CHECK(euclidean(vec(u3, {36, 20, 0}), vec(u3, {30, 20, 8})) == doctest::Approx(10.0));
    CHECK_THROWS_AS(euclidean(vec(u2, {1, 2}), vec(u3, {1, 2, 3})), ContractViolation);
}

TEST_CASE("sorensen distance") {
    const auto u = universe({A, B});
    CHECK(*sorensen(vec(u, {5, 7}), vec(u, {5, 7})) == 0.0);
    CHECK(*sorensen(vec(u, {1, 0}), vec(u, {0, 1})) == doctest::Approx(1.0));
    CHECK(*sorensen(vec(u, {36, 20}), vec(u, {30, 26})) == doctest::Approx(12.0 / 112.0));
    CHECK_FALSE(sorensen(vec(u, {0, 0}), vec(u, {0, 0})).has_value());
    CHECK(*sorensen(vec(u, {2, 9}), vec(u, {4, 1})) == doctest::Approx(*sorensen(vec(u, {4, 1}), vec(u, {2, 9}))));
}

TEST_CASE("metric names") {
    CHECK(parse_metric("sorensen") == Metric::Sorensen);
    CHECK(metric_name(Metric::Euclidean) == "euclidean");
    CHECK(parse_tau_scope("query") == TauScope::QueryOnly);
    CHECK(tau_scope_name(TauScope::MapOnly) == "map");
    CHECK_THROWS(parse_metric("cosine"));
}

TEST_CASE("map universe and minimum") {
    const auto m = three_entry_map();
    CHECK(ap_universe(m, -90) == ApUniverse{A, B, C});
    CHECK(ap_universe(m, -75) == ApUniverse{A, B});
    CHECK(ap_universe(m, -30).empty());
    CHECK(map_min_rss(m) == -81);
}

TEST_CASE("nearest neighbour") {
    const auto m = three_entry_map();
    LocalizationConfig cfg;
    SUBCASE("exact fingerprint returns its entry") {
        for (const auto& e : m.entries) {
            const auto r = knn_localize(e.fingerprint, m, cfg);
            CHECK(r.x == e.x);
            CHECK(r.y == e.y);
            CHECK(r.floor == e.floor);
            CHECK(*r.neighbors[0].distance == 0.0);
        }
    }
    SUBCASE("majority floor over three neighbours") {
        cfg.k = 3;
        const auto r = knn_localize({{A, -70}, {B, -40}, {C, -80}}, m, cfg);
        CHECK(r.floor == 1);
        CHECK(r.x == doctest::Approx(5.0));
        REQUIRE(r.neighbors.size() == 3);
        CHECK(r.neighbors[0].entry == 2);
        CHECK(*r.neighbors[0].distance <= *r.neighbors[1].distance);
    }
    SUBCASE("floor tie goes to the nearest neighbour") {
        cfg.k = 2;
        const auto r = knn_localize({{A, -70}, {B, -40}, {C, -80}}, m, cfg);
        CHECK(r.floor == 2);
    }
    SUBCASE("equal distances keep map order") {
        RadioMap twin;
        twin.entries = {at(1, 0, 1, {{A, -50}}), at(2, 0, 1, {{A, -50}})};
        const auto r = knn_localize({{A, -50}}, twin, cfg);
        CHECK(r.x == 1.0);
    }
    SUBCASE("sorensen with undefined distances ranks them last") {
        cfg.metric = Metric::Sorensen;
        cfg.k = 3;
        RadioMap sparse;
        sparse.entries = {at(0, 0, 1, {{A, -95}}), at(3, 0, 1, {{B, -50}}), at(6, 0, 1, {{A, -60}})};
        const auto r = knn_localize({{A, -95}}, sparse, cfg);
        REQUIRE(r.neighbors.size() == 3);
        CHECK(r.neighbors[0].distance.has_value());
        CHECK_FALSE(r.neighbors[2].distance.has_value());
        CHECK(r.neighbors[2].entry == 0);
    }
    SUBCASE("empty map") {
        CHECK_THROWS_AS(knn_localize({{A, -50}}, RadioMap{}, cfg), ValidationError);
    }
}

TEST_CASE("euclidean selection survives a common RSS offset") {
    auto m = three_entry_map();
    Fingerprint q = {{A, -52}, {B, -60}};
    LocalizationConfig cfg;
    cfg.tau = -200;
    const auto before = knn_localize(q, m, cfg).neighbors[0].entry;
    for (auto& e : m.entries)
        for (auto& [mac, rss] : e.fingerprint) rss -= 9;
    for (auto& [mac, rss] : q) rss -= 9;
    CHECK(knn_localize(q, m, cfg).neighbors[0].entry == before);
}

TEST_CASE("evaluation") {
    const auto m = three_entry_map();
    LocalizationConfig cfg;
    SUBCASE("exact queries") {
        std::vector<TestQuery> q;
        for (const auto& e : m.entries) q.push_back({e.x, e.y, e.floor, e.fingerprint});
        const auto r = evaluate(q, m, cfg);
        CHECK(r.floor_accuracy == 1.0);
        CHECK(*r.mean_error == 0.0);
        CHECK(r.error_cdf.size() == 3);
    }
    SUBCASE("one query two metres off") {
        const TestQuery q[] = {{2, 0, 1, m.entries[0].fingerprint}};
        CHECK(*evaluate(q, m, cfg).mean_error == doctest::Approx(2.0));
    }
    SUBCASE("half on the wrong floor") {
        const TestQuery q[] = {{0, 0, 1, m.entries[0].fingerprint},
                               {1, 0, 1, m.entries[1].fingerprint},
                               {10, 0, 1, m.entries[2].fingerprint},
                               {5, 0, 2, m.entries[1].fingerprint}};
        const auto r = evaluate(q, m, cfg);
        CHECK(r.floor_accuracy == 0.5);
        CHECK(*r.mean_error == doctest::Approx(2.0));  // (0 + 4) / 2
        CHECK(r.error_cdf == std::vector<double>{0.0, 4.0});
    }
    SUBCASE("empty query set") { CHECK_THROWS_AS(evaluate({}, m, cfg), ValidationError); }
}

TEST_CASE("percentile") {
    const double v[] = {1, 2, 3, 4, 5};
    CHECK(percentile(v, 0.5) == 3.0);
    CHECK(percentile(v, 0.75) == 4.0);
    CHECK(percentile(v, 0.9) == doctest::Approx(4.6));
    CHECK(percentile(v, 0.0) == 1.0);
    CHECK(percentile(v, 1.0) == 5.0);
}

TEST_CASE("report writers") {
    const auto m = three_entry_map();
    std::vector<TestQuery> q;
    for (const auto& e : m.entries) q.push_back({e.x, e.y, e.floor, e.fingerprint});
    const auto r = evaluate(q, m, LocalizationConfig{});
    std::ostringstream csv;
    write_evaluation_csv(r, csv);
    const auto text = csv.str();
    CHECK(text.rfind("query_id,truth_x,truth_y,truth_floor,est_x,est_y,est_floor,error_m,floor_correct\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 4);
    const auto summary = evaluation_summary_json(r);
    for (const char* key : {"floor_accuracy", "mean_error_m", "p50", "p75", "p90"})
        CHECK(summary.find(key) != std::string::npos);
}

TEST_CASE("query files round trip") {
    const std::vector<TestQuery> q = {{1.5, 2.5, 1, {{A, -50}}}, {3, 4, 2, {{B, -61}, {C, -77}}}};
    std::stringstream buf;
    write_queries(q, buf);
    const auto back = parse_queries(buf);
    REQUIRE(back.size() == 2);
    CHECK(back[1].fingerprint == q[1].fingerprint);
    CHECK(back[0].x == 1.5);
    CHECK(back[1].floor == 2);
}

TEST_CASE("localization config validation") {
    LocalizationConfig cfg;
    cfg.k = 0;
    CHECK_THROWS(cfg.validate());
}
