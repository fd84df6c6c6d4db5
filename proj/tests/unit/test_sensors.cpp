#include <doctest.h>

#include <cmath>
#include <sstream>

#include "fpmap/error.hpp"
#include "fpmap/sensors.hpp"
#include "synth.hpp"

using namespace fpmap;
using fpmap::testing::accel_trace;
using fpmap::testing::walking;

TEST_CASE("accel magnitude") {
    CHECK(accel_magnitude({0, 0, 0, 9.81}) == doctest::Approx(9.81));
    CHECK(accel_magnitude({0, 3, 4, 0}) == doctest::Approx(5.0));
    CHECK(accel_magnitude({0, 0, 0, 0}) == 0.0);
}

TEST_CASE("trace ingestion") {
    SUBCASE("three accel lines") {
        std::istringstream in(
            R"({"ch":"accel","t":0.0,"v":[0,0,9.81]}
{"ch":"accel","t":0.02,"v":[0,0,9.8]}
{"ch":"accel","t":0.04,"v":[0.1,0,9.8]}
)");
        const auto tr = parse_trace(in);
        CHECK(tr.accel.size() == 3);
        CHECK(tr.size() == 3);
        CHECK(tr.accel[2].ax == doctest::Approx(0.1));
    }
    SUBCASE("baro regression names the channel") {
        std::istringstream in(
            R"({"ch":"baro","t":1.0,"v":1013.2}
{"ch":"baro","t":0.5,"v":1013.2}
)");
        try {
            parse_trace(in);
            FAIL("expected a validation error");
        } catch (const ValidationError& e) {
            CHECK(std::string(e.what()).find("baro") != std::string::npos);
        }
    }
    SUBCASE("empty input") {
        std::istringstream in("");
        CHECK(parse_trace(in).empty());
    }
    SUBCASE("malformed line carries its number") {
        std::istringstream in("{\"ch\":\"accel\",\"t\":0,\"v\":[0,0,9.8]}\n{not json\n");
        try {
            parse_trace(in);
            FAIL("expected a parse error");
        } catch (const ParseError& e) {
            CHECK(e.line() == 2);
        }
    }
    SUBCASE("positive rss rejected") {
        std::istringstream in(R"({"ch":"wifi","t":0,"v":[["aa:bb:cc:dd:ee:ff",3]]})");
        CHECK_THROWS_AS(parse_trace(in), ValidationError);
    }
    SUBCASE("duplicate mac in one scan rejected") {
        std::istringstream in(
            R"({"ch":"wifi","t":0,"v":[["aa:bb:cc:dd:ee:ff",-50],["aa:bb:cc:dd:ee:ff",-60]]})");
        CHECK_THROWS_AS(parse_trace(in), ValidationError);
    }
    SUBCASE("unknown channel") {
        std::istringstream in(R"({"ch":"lidar","t":0,"v":1})");
        CHECK_THROWS_AS(parse_trace(in), ParseError);
    }
}

TEST_CASE("trace round trip") {
    SensorTrace tr;
    tr.accel = {{0.0, 0.1, 0.2, 9.8}, {0.02, 0.0, 0.0, 9.81}};
    tr.gyro = {{0.0, 0, 0, 0.5}};
    tr.mag = {{0.0, 30, -1, -40}};
    tr.baro = {{0.0, 1013.25}, {0.1, 1013.2}};
    tr.wifi = {{0.01, {{"aa:bb:cc:dd:ee:01", -60}, {"aa:bb:cc:dd:ee:02", -71}}}};
    tr.truth = {{0.0, 1.5, -2.0, 2}};
    std::stringstream buf;
    write_trace(tr, buf);
    const auto back = parse_trace(buf);
    REQUIRE(back.accel.size() == 2);
    CHECK(back.accel[0].ax == tr.accel[0].ax);
    CHECK(back.baro[1].pressure == tr.baro[1].pressure);
    CHECK(back.wifi[0].readings == tr.wifi[0].readings);
    CHECK(back.truth[0].floor == 2);
    CHECK(back.merged().size() == tr.size());
}

TEST_CASE("merged order keeps channel order at equal times") {
    SensorTrace tr;
    tr.baro = {{0.0, 1000}};
    tr.accel = {{0.0, 0, 0, 9.8}};
    const auto m = tr.merged();
    REQUIRE(m.size() == 2);
    CHECK(std::holds_alternative<AccelSample>(m[0]));
    CHECK(std::holds_alternative<BaroSample>(m[1]));
}

TEST_CASE("mac syntax") {
    CHECK(is_valid_mac("aa:bb:cc:dd:ee:ff"));
    CHECK(is_valid_mac("00:1A:2b:3C:4d:5E"));
    CHECK_FALSE(is_valid_mac("aa:bb:cc:dd:ee"));
    CHECK_FALSE(is_valid_mac("aa-bb-cc-dd-ee-ff"));
    CHECK_FALSE(is_valid_mac("gg:bb:cc:dd:ee:ff"));
}

TEST_CASE("median interval") {
    const double t[] = {0.0, 0.02, 0.04, 0.10, 0.12};
    CHECK(median_interval(t) == doctest::Approx(0.02));
    const double one[] = {1.0};
    CHECK(median_interval(one) == 0.0);
}

TEST_CASE("compass azimuth follows the map frame") {
    CHECK(compass_azimuth({0, 30, 0, -40}) == doctest::Approx(0.0));
    CHECK(compass_azimuth({0, 0, -30, -40}) == doctest::Approx(std::numbers::pi / 2));
    CHECK(compass_azimuth({0, -30, 0, -40}) == doctest::Approx(std::numbers::pi));
}

TEST_CASE("motion classification") {
    SensorConfig cfg;
    SUBCASE("constant magnitude is still") {
        const auto labels = classify_motion(accel_trace(4.0, [](double) { return 9.81; }), cfg);
        REQUIRE_FALSE(labels.empty());
        for (const auto& l : labels) CHECK(l.state == MotionState::Still);
    }
    SUBCASE("2 m/s^2 sinusoid is walking") {
        // Population variance of A sin over whole cycles is A^2 / 2 = 2 > 0.5.
        const auto labels =
            classify_motion(accel_trace(4.0, [](double t) { return walking(t, 2.0, 0.5); }), cfg);
        REQUIRE_FALSE(labels.empty());
        for (const auto& l : labels) CHECK(l.state == MotionState::Walking);
    }
    SUBCASE("still, walking, still boundaries within one window") {
        const auto tr = accel_trace(12.0, [](double t) {
            return (t >= 4.0 && t < 8.0) ? walking(t) : 9.81;
        });
        const auto labels = classify_motion(tr, cfg);
        const double window = cfg.acc_window / fpmap::testing::kRate;
        double first_walk = -1, last_walk = -1;
        for (const auto& l : labels) {
            if (l.state == MotionState::Walking) {
                if (first_walk < 0) first_walk = l.t;
                last_walk = l.t;
            }
        }
        CHECK(labels.front().state == MotionState::Still);
        CHECK(labels.back().state == MotionState::Still);
        CHECK(std::abs(first_walk - 4.0) <= window);
        CHECK(std::abs(last_walk - 8.0) <= window);
        for (const auto& l : labels) {
            CHECK(l.t >= tr.accel.front().t);
            CHECK(l.t <= tr.accel.back().t);
        }
    }
    SUBCASE("too short for one window") {
        CHECK(classify_motion(accel_trace(0.5, [](double) { return 9.81; }), cfg).empty());
    }
}

TEST_CASE("motion lookup") {
    const MotionLabel labels[] = {{1.0, MotionState::Still}, {2.0, MotionState::Walking}};
    CHECK(motion_at(labels, 0.5) == MotionState::Still);
    CHECK(motion_at(labels, 1.5) == MotionState::Still);
    CHECK(motion_at(labels, 2.0) == MotionState::Walking);
    CHECK_FALSE(motion_at(std::span<const MotionLabel>{}, 1.0).has_value());
}

TEST_CASE("step detection") {
    SensorConfig cfg;
    SUBCASE("ten cycles give ten steps") {
        const auto steps =
            detect_steps(accel_trace(5.0, [](double t) { return walking(t, 2.0, 0.5); }), cfg);
        REQUIRE(steps.size() == 10);
        CHECK_FALSE(steps.front().periodicity.has_value());
        for (std::size_t i = 1; i < steps.size(); ++i) {
            REQUIRE(steps[i].periodicity.has_value());
            CHECK(std::abs(*steps[i].periodicity - 0.5) <= 1.0 / fpmap::testing::kRate + 1e-9);
            CHECK(steps[i].t > steps[i - 1].t);
        }
    }
    SUBCASE("constant signal") {
        CHECK(detect_steps(accel_trace(5.0, [](double) { return 9.81; }), cfg).empty());
    }
    SUBCASE("tiny sinusoid below the variance threshold") {
        CHECK(detect_steps(accel_trace(5.0, [](double t) { return walking(t, 0.05, 0.5); }), cfg).empty());
    }
    SUBCASE("empty trace") { CHECK(detect_steps(SensorTrace{}, cfg).empty()); }
}

TEST_CASE("step count invariances") {
    SensorConfig cfg;
    const auto base = accel_trace(8.0, [](double t) { return walking(t, 2.0, 0.56); });
    const auto n = detect_steps(base, cfg).size();
    REQUIRE(n > 0);

    SUBCASE("time translation") {
        auto shifted = base;
        for (auto& s : shifted.accel) s.t += 123.4;
        CHECK(detect_steps(shifted, cfg).size() == n);
    }
    SUBCASE("axis rotation") {
        auto rotated = base;
        const double a = 0.7, b = -0.4;
        for (auto& s : rotated.accel) {
            // Rotate (0,0,z) about x by a, then about z by b.
            const double y1 = -std::sin(a) * s.az, z1 = std::cos(a) * s.az;
            s.ax = -std::sin(b) * y1;
            s.ay = std::cos(b) * y1;
            s.az = z1;
        }
        CHECK(detect_steps(rotated, cfg).size() == n);
    }
}

TEST_CASE("sensor config validation") {
    SensorConfig cfg;
    cfg.acc_window = 0;
    CHECK_THROWS(cfg.validate());
}
