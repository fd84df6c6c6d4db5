#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fpmap/angles.hpp"
#include "fpmap/error.hpp"
#include "fpmap/landmarks.hpp"
#include "synth.hpp"

using namespace fpmap;

namespace {

// Labels every 0.2 s from (state, seconds) runs.
std::vector<MotionLabel> labels(std::initializer_list<std::pair<MotionState, double>> runs) {
    std::vector<MotionLabel> out;
    double t = 0;
    for (const auto& [state, seconds] : runs) {
        const int n = static_cast<int>(std::lround(seconds / 0.2));
        for (int i = 0; i < n; ++i) {
            t += 0.2;
            out.push_back({t, state});
        }
    }
    return out;
}

std::vector<PressureWindow> windows_from(const std::vector<double>& means) {
    std::vector<PressureWindow> w;
    for (std::size_t i = 0; i < means.size(); ++i)
        w.push_back({static_cast<double>(i), static_cast<double>(i + 1), means[i]});
    return w;
}

const char* kTwoNodes = R"({
  "nodes": [{"id":"A","x":0,"y":0,"floor":1,"rules":["acc"]},
            {"id":"B","x":10,"y":0,"floor":1,"rules":["gyro"]}],
  "edges": [{"from":"A","to":"B","heading_deg":0,"distance_m":%D%}]
})";

std::string two_nodes(double distance) {
    std::string s = kTwoNodes;
    const auto at = s.find("%D%");
    return s.replace(at, 3, std::to_string(distance));
}

}  // namespace

constexpr auto W = MotionState::Walking;
constexpr auto S = MotionState::Still;

TEST_CASE("accelerometer landmarks") {
    LandmarkConfig cfg;
    SUBCASE("walk, pause, walk") {
        const auto m = labels({{W, 3}, {S, 2}, {W, 3}});
        const auto ev = detect_acc_landmarks(m, cfg);
        REQUIRE(ev.size() == 1);
        CHECK(ev[0].kind == RuleKind::Accelerometer);
        CHECK(ev[0].t == doctest::Approx(3.2));  // first Still label
        CHECK(ev[0].auxiliary == doctest::Approx(2.0));
    }
    SUBCASE("pause longer than the still range") {
        CHECK(detect_acc_landmarks(labels({{W, 3}, {S, 12}, {W, 3}}), cfg).empty());
    }
    SUBCASE("pause shorter than the still range") {
        CHECK(detect_acc_landmarks(labels({{W, 3}, {S, 0.6}, {W, 3}}), cfg).empty());
    }
    SUBCASE("walking leg too short") {
        CHECK(detect_acc_landmarks(labels({{W, 1}, {S, 2}, {W, 3}}), cfg).empty());
    }
    SUBCASE("all walking") { CHECK(detect_acc_landmarks(labels({{W, 10}}), cfg).empty()); }
}

TEST_CASE("gyroscope landmarks") {
    using fpmap::testing::gyro_trace;
    LandmarkConfig cfg;
    SUBCASE("1.2 rad/s for 1.5 s") {
        const auto tr = gyro_trace(5.0, [](double t) { return (t >= 1.0 && t < 2.5) ? 1.2 : 0.0; });
        const auto ev = detect_gyro_landmarks(tr, cfg);
        REQUIRE(ev.size() == 1);
        CHECK(ev[0].auxiliary == doctest::Approx(1.8).epsilon(1e-6));
        CHECK(ev[0].t >= 1.0);
        CHECK(ev[0].t < 1.3);
    }
    SUBCASE("below threshold") {
        CHECK(detect_gyro_landmarks(gyro_trace(5.0, [](double) { return 0.5; }), cfg).empty());
    }
    SUBCASE("two clockwise bursts") {
        const auto tr = gyro_trace(8.0, [](double t) {
            return ((t >= 1.0 && t < 2.0) || (t >= 5.0 && t < 6.0)) ? -1.5 : 0.0;
        });
        const auto ev = detect_gyro_landmarks(tr, cfg);
        REQUIRE(ev.size() == 2);
        CHECK(ev[0].auxiliary < 0);
        CHECK(ev[1].auxiliary < 0);
    }
    SUBCASE("negating wz flips the sign, not the count") {
        auto f = [](double t) { return (t >= 1.0 && t < 2.0) ? 1.6 : 0.1; };
        const auto a = detect_gyro_landmarks(gyro_trace(4.0, f), cfg);
        const auto b = detect_gyro_landmarks(gyro_trace(4.0, [&](double t) { return -f(t); }), cfg);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].auxiliary == doctest::Approx(-b[i].auxiliary));
    }
}

TEST_CASE("still turns are suppressed") {
    std::vector<LandmarkEvent> ev = {{1.0, RuleKind::Gyroscope, 1.5}, {3.0, RuleKind::Gyroscope, 1.5},
                                     {3.1, RuleKind::Accelerometer, 2.0}};
    const std::vector<MotionLabel> m = {{0.5, W}, {2.5, S}, {4.0, W}};
    const auto kept = suppress_still_turns(ev, m);
    REQUIRE(kept.size() == 2);
    CHECK(kept[0].t == 1.0);
    CHECK(kept[1].kind == RuleKind::Accelerometer);
}

TEST_CASE("sign function") {
    CHECK(sgn(0.1) == 1);
    CHECK(sgn(0.0) == 0);
    CHECK(sgn(-0.1) == -1);
    for (double x : {0.3, 2.0, 1e-12}) CHECK(sgn(-x) == -sgn(x));
}

TEST_CASE("barometric landmarks") {
    LandmarkConfig cfg;
    SUBCASE("flat, ramp down, flat") {
        std::vector<double> p(10, 1013.0);
        for (int k = 1; k <= 6; ++k) p.push_back(1013.0 - 0.09 * k);
        for (int k = 0; k < 6; ++k) p.push_back(p.back());
        const auto w = windows_from(p);
        const auto ev = detect_baro_landmarks(std::span<const PressureWindow>(w), cfg);
        REQUIRE(ev.size() == 2);
        CHECK(ev[0].kind == RuleKind::BaroEntrance);
        CHECK(ev[0].t == doctest::Approx(w[9].t_end));
        CHECK(ev[1].kind == RuleKind::BaroExit);
        CHECK(ev[1].t == doctest::Approx(w[15].t_start));
        CHECK(ev[0].auxiliary == doctest::Approx(-0.54));
    }
    SUBCASE("no vertical movement") {
        const auto w = windows_from(std::vector<double>(20, 1010.0));
        CHECK(detect_baro_landmarks(std::span<const PressureWindow>(w), cfg).empty());
    }
    SUBCASE("single-window blip") {
        std::vector<double> p(20, 1010.0);
        p[8] += 0.1;
        const auto w = windows_from(p);
        CHECK(detect_baro_landmarks(std::span<const PressureWindow>(w), cfg).empty());
    }
    SUBCASE("entrance and exit alternate") {
        std::vector<double> p(5, 1013.0);
        for (int r = 0; r < 3; ++r) {
            const double dir = r % 2 ? 1.0 : -1.0;
            for (int k = 0; k < 5; ++k) p.push_back(p.back() + dir * 0.1);
            for (int k = 0; k < 5; ++k) p.push_back(p.back());
        }
        const auto w = windows_from(p);
        const auto ev = detect_baro_landmarks(std::span<const PressureWindow>(w), cfg);
        REQUIRE(ev.size() == 6);
        for (std::size_t i = 0; i < ev.size(); ++i)
            CHECK(ev[i].kind == (i % 2 ? RuleKind::BaroExit : RuleKind::BaroEntrance));
    }
    SUBCASE("window means from samples") {
        std::vector<BaroSample> s;
        for (int i = 0; i < 30; ++i) s.push_back({i * 0.1, i < 10 ? 1.0 : 2.0});
        const auto w = pressure_windows(s, 1.0);
        REQUIRE(w.size() == 3);
        CHECK(w[0].mean == doctest::Approx(1.0));
        CHECK(w[1].mean == doctest::Approx(2.0));
        CHECK(w[2].t_start == doctest::Approx(2.0));
    }
}

TEST_CASE("rule names") {
    CHECK(parse_rule("gyro_left") == Rule{RuleKind::Gyroscope, 1});
    CHECK(parse_rule("gyro_right") == Rule{RuleKind::Gyroscope, -1});
    CHECK(parse_rule("baro_in").kind == RuleKind::BaroEntrance);
    CHECK(rule_name(parse_rule("baro_out")) == "baro_out");
    CHECK_THROWS(parse_rule("laser"));
}

TEST_CASE("landmark graph loading") {
    SUBCASE("axis-aligned edge") {
        const auto g = parse_landmark_graph(two_nodes(10.0));
        CHECK(g.nodes().size() == 2);
        REQUIRE(g.edge("A", "B") != nullptr);
        CHECK(g.edge("A", "B")->distance == doctest::Approx(10.0));
        CHECK(g.edge("B", "A") == nullptr);
    }
    SUBCASE("inconsistent distance") {
        CHECK_THROWS_AS(parse_landmark_graph(two_nodes(12.0)), GeometryError);
    }
    SUBCASE("override accepts declared geometry") {
        std::string s = two_nodes(12.0);
        s.replace(s.find("\"distance_m\""), 0, "\"override\":true,");
        CHECK(parse_landmark_graph(s).edge("A", "B")->distance == doctest::Approx(12.0));
    }
    SUBCASE("dangling endpoint") {
        std::string s = two_nodes(10.0);
        s.replace(s.find("\"to\":\"B\""), 8, "\"to\":\"Z\"");
        CHECK_THROWS_AS(parse_landmark_graph(s), ValidationError);
    }
    SUBCASE("unknown field") {
        std::string s = two_nodes(10.0);
        s.replace(s.find("\"edges\""), 0, "\"colour\":1,");
        CHECK_THROWS_AS(parse_landmark_graph(s), SchemaError);
    }
    SUBCASE("empty rules") {
        CHECK_THROWS_AS(parse_landmark_graph(R"({"nodes":[{"id":"A","x":0,"y":0,"floor":1,"rules":[]}]})"),
                        ValidationError);
    }
}

TEST_CASE("reverse completion") {
    const auto g = parse_landmark_graph(R"({
      "nodes": [{"id":"A","x":0,"y":0,"floor":1,"rules":["acc"]},
                {"id":"B","x":3,"y":4,"floor":1,"rules":["gyro"]},
                {"id":"C","x":3,"y":10,"floor":1,"rules":["gyro"]}],
      "edges": [{"from":"A","to":"B"},{"from":"B","to":"C"}],
      "auto_reverse": true})");
    CHECK(g.edges().size() == 4);
    for (const auto& e : g.edges()) {
        const Edge* back = g.edge(e.to, e.from);
        REQUIRE(back != nullptr);
        CHECK(angle_distance(e.heading, back->heading) == doctest::Approx(std::numbers::pi));
        CHECK(e.distance == back->distance);
    }
    CHECK(g.edge("A", "B")->distance == doctest::Approx(5.0));
}

TEST_CASE("floor duplicate keeps the planar layout") {
    const auto g1 = parse_landmark_graph(two_nodes(10.0));
    const auto g2 = relabel_floor(g1, 2, "_2");
    REQUIRE(g2.nodes().size() == g1.nodes().size());
    for (std::size_t i = 0; i < g1.nodes().size(); ++i) {
        CHECK(g2.nodes()[i].floor == 2);
        CHECK(g2.nodes()[i].x == g1.nodes()[i].x);
        CHECK(g2.nodes()[i].y == g1.nodes()[i].y);
    }
    REQUIRE(g2.edge("A_2", "B_2") != nullptr);
    CHECK(g2.edge("A_2", "B_2")->heading == g1.edge("A", "B")->heading);
}

TEST_CASE("graph dump round trip") {
    const auto g = parse_landmark_graph(two_nodes(10.0));
    const auto back = parse_landmark_graph(dump_landmark_graph(g));
    REQUIRE(back.nodes().size() == 2);
    CHECK(back.nodes()[1].rules == g.nodes()[1].rules);
    CHECK(back.edge("A", "B")->distance == g.edge("A", "B")->distance);
}
