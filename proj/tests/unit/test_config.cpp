#include <doctest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fpmap/config.hpp"
#include "fpmap/error.hpp"

using namespace fpmap;

TEST_CASE("shipped defaults file matches built-in defaults") {
    std::ifstream in(std::filesystem::path(FPMAP_SOURCE_DIR) / "config" / "defaults.json");
    REQUIRE(in);
    std::stringstream buf;
    buf << in.rdbuf();
    CHECK(nlohmann::json::parse(buf.str()) == nlohmann::json::parse(config_to_json(PipelineConfig{})));

    const auto loaded = load_config(std::filesystem::path(FPMAP_SOURCE_DIR) / "config" / "defaults.json");
    CHECK(config_to_json(loaded) == config_to_json(PipelineConfig{}));
}

TEST_CASE("parameter defaults") {
    const PipelineConfig c;
    CHECK(c.sensors.acc_window == 50);
    CHECK(c.sensors.variance_threshold == 0.5);
    CHECK(c.landmarks.gyro_threshold == 1.1);
    CHECK(c.landmarks.baro_flat == 0.05);
    CHECK(c.landmarks.baro_delta == 0.3);
    CHECK(c.landmarks.walking_min == 2.0);
    CHECK(c.landmarks.still_min == 1.0);
    CHECK(c.landmarks.still_max == 8.0);
    CHECK(c.pdr.step_length == 0.63);
    CHECK(c.pdr.pressure_per_floor == 0.45);
    CHECK(c.pdr.confidence_threshold == 0.25);
    CHECK(c.radiomap.t_min == 0.4);
    CHECK(c.radiomap.t_max == 1.0);
    CHECK(c.radiomap.belief_threshold == 15.0);
    CHECK(c.localization.k == 1);
}

TEST_CASE("dotted overrides") {
    PipelineConfig c;
    apply_override(c, "radiomap.belief_threshold=18");
    CHECK(c.radiomap.belief_threshold == 18.0);
    apply_override(c, "localization.metric=sorensen");
    CHECK(c.localization.metric == Metric::Sorensen);
    apply_override(c, "pdr.heading_threshold_deg=45");
    CHECK(c.pdr.heading_threshold == doctest::Approx(deg_to_rad(45)));
    apply_override(c, "radiomap.belief_ceiling=10");
    REQUIRE(c.radiomap.belief_ceiling);
    apply_override(c, "radiomap.belief_ceiling=null");
    CHECK_FALSE(c.radiomap.belief_ceiling);

    CHECK_THROWS_AS(apply_override(c, "radiomap.nonsense=1"), SchemaError);
    CHECK_THROWS_AS(apply_override(c, "localization.k=1.5"), SchemaError);
    CHECK_THROWS_AS(apply_override(c, "no-equals-sign"), ParseError);
}

TEST_CASE("every key round-trips through json") {
    PipelineConfig c;
    apply_override(c, "sensors.min_step_gap=0.25");
    apply_override(c, "pdr.mode=pdr-gyro");
    PipelineConfig back;
    apply_config_json(back, config_to_json(c));
    CHECK(config_to_json(back) == config_to_json(c));
    CHECK(config_keys().size() == 34);
}

TEST_CASE("config documents are strict") {
    PipelineConfig c;
    CHECK_THROWS_AS(apply_config_json(c, R"({"version":1,"pdr":{"stride":1}})"), SchemaError);
    CHECK_THROWS_AS(apply_config_json(c, R"({"version":7})"), SchemaError);
    CHECK_THROWS_AS(apply_config_json(c, R"({"version":1,"gps":{}})"), SchemaError);
    apply_config_json(c, R"({"version":1,"radiomap":{"belief_threshold":10}})");
    CHECK(c.radiomap.belief_threshold == 10.0);
}
