#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fpmap/landmarks.hpp"
#include "fpmap/localization.hpp"
#include "fpmap/pdr.hpp"
#include "fpmap/sensors.hpp"

namespace fpmap {

struct AccessPoint {
    std::string mac;
    double x = 0, y = 0;
    int floor = 0;
    double tx_power = -30;  ///< dBm at 1 m
    double path_loss_exponent = 3.0;
};

struct Corridor {
    int floor = 0;
    std::vector<PlanarPoint> points;
};

struct Environment {
    LandmarkGraph graph;
    std::vector<Corridor> corridors;  ///< derived from graph edges when not declared
    std::vector<AccessPoint> aps;
    double floor_height = 4.0;          ///< m
    double floor_attenuation = 15.0;    ///< dB per floor crossed
    double base_pressure = 1013.25;     ///< hPa at floor 0
    double pressure_per_floor = 0.45;   ///< hPa
};

struct ScriptStop {
    LandmarkId at;
    double duration = 0;
};

struct FalseWalking {
    double t = 0;
    double duration = 0;
};

/// Walking style for a range of legs (leg i runs waypoint i -> i+1).
struct LegStyle {
    int first_leg = 0;
    int last_leg = 0;
    std::optional<std::pair<double, double>> period_range;  ///< s, uniform per step
    double period_jitter = 0;  ///< relative, uniform in [-j, j]
    double length_jitter = 0;  ///< relative step length variation, renormalized per leg
};

struct WalkScript {
    std::vector<LandmarkId> waypoints;
    double speed = 1.26;       ///< m/s
    double step_length = 0.63; ///< m, nominal
    std::vector<ScriptStop> stops;
    std::vector<FalseWalking> false_walking;
    std::vector<LegStyle> styles;
    double period_jitter = 0;
    double scan_interval = 2.0;   ///< s
    double initial_still = 2.0;   ///< s
    double final_still = 2.0;     ///< s
    double turn_duration = 0.5;   ///< s per in-place turn
};

struct BiasZone {
    std::optional<int> floor;
    double x_min = 0, x_max = 0, y_min = 0, y_max = 0;
    double offset_deg = 0;
};

struct NoiseModel {
    double accel_std = 0;       ///< m/s^2
    double gyro_bias = 0;       ///< rad/s
    double gyro_std = 0;        ///< rad/s
    double compass_std_deg = 0;
    std::vector<BiasZone> compass_zones;
    double baro_std = 0;        ///< hPa
    double rss_shadowing = 0;   ///< dB
    std::uint64_t seed = 1;
};

struct QuerySpec {
    double spacing = 0;  ///< m along corridors; 0 disables path sampling
    std::vector<std::pair<PlanarPoint, int>> positions;  ///< explicit (x, y), floor
};

struct Scenario {
    Environment env;
    WalkScript script;
    NoiseModel noise;
    QuerySpec queries;
};

struct ScriptedVisit {
    double t = 0;
    LandmarkId id;
};

struct SimulatedWalk {
    SensorTrace trace;
    Pose initial;
    int scripted_steps = 0;
    std::vector<ScriptedVisit> visits;  ///< arrival at each waypoint after the first
};

/// Synthetic trace for one scripted walk; deterministic under noise.seed.
SimulatedWalk generate_trace(const Environment& env, const WalkScript& script, const NoiseModel& noise);

/// Log-distance RSS before shadowing and quantization, with a per-floor penalty.
double model_rss(const AccessPoint& ap, double x, double y, double floor, const Environment& env);

/// Quantized scan at a location; shadowing[i] (dB) is subtracted from AP i.
/// Readings below -100 dBm are absent.
Fingerprint model_fingerprint(const Environment& env, double x, double y, double floor,
                              const std::vector<double>& shadowing);

std::vector<TestQuery> generate_test_queries(const Environment& env,
                                             const std::vector<std::pair<PlanarPoint, int>>& positions,
                                             const NoiseModel& noise);

/// Points every `spacing` meters along each corridor.
std::vector<std::pair<PlanarPoint, int>> sample_corridor_positions(const Environment& env, double spacing);

std::vector<std::pair<PlanarPoint, int>> query_positions(const Scenario& scenario);

Scenario parse_scenario(const std::string& json_text);
Scenario load_scenario(const std::filesystem::path& path);

void write_pose_json(const Pose& pose, std::ostream& out);
Pose parse_pose_json(const std::string& json_text);

}  // namespace fpmap
