#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "fpmap/sensors.hpp"

namespace fpmap {

using LandmarkId = std::string;

enum class RuleKind { Accelerometer, Gyroscope, BaroEntrance, BaroExit };

/// One detection rule attached to a landmark. Gyroscope rules may pin the
/// turn direction: +1 counterclockwise (left), -1 clockwise (right), 0 either.
struct Rule {
    RuleKind kind = RuleKind::Accelerometer;
    int turn_sign = 0;

    bool operator==(const Rule&) const = default;
};

/// "acc", "gyro", "gyro_left", "gyro_right", "baro_in", "baro_out".
Rule parse_rule(const std::string& name);
std::string rule_name(const Rule& rule);
std::string kind_name(RuleKind kind);

struct Landmark {
    LandmarkId id;
    double x = 0, y = 0;
    int floor = 0;
    std::vector<Rule> rules;
};

struct Edge {
    LandmarkId from;
    LandmarkId to;
    double heading = 0;   ///< rad CCW from map +x, in [0, 2pi)
    double distance = 0;  ///< m, > 0
    bool geometry_override = false;  ///< declared heading/distance need not match coordinates
};

/// Directed landmark graph. Immutable once built; lookups are by id.
class LandmarkGraph {
public:
    LandmarkGraph() = default;

    /// Checks every invariant (unique ids, non-empty rules, finite coordinates,
    /// known edge endpoints, positive distances); throws ValidationError.
    LandmarkGraph(std::vector<Landmark> nodes, std::vector<Edge> edges);

    const std::vector<Landmark>& nodes() const { return nodes_; }
    const std::vector<Edge>& edges() const { return edges_; }

    const Landmark* find(const LandmarkId& id) const;
    const Landmark& at(const LandmarkId& id) const;

    /// Edges leaving `id`, in declaration order.
    std::vector<const Edge*> outgoing(const LandmarkId& id) const;
    const Edge* edge(const LandmarkId& from, const LandmarkId& to) const;

private:
    std::vector<Landmark> nodes_;
    std::vector<Edge> edges_;
    std::unordered_map<LandmarkId, std::size_t> index_;
    std::vector<std::vector<std::size_t>> out_;
};

struct GraphLoadOptions {
    double heading_tolerance_deg = 1.0;
    double distance_tolerance_m = 0.05;
};

LandmarkGraph parse_landmark_graph(const std::string& json_text,
                                   const GraphLoadOptions& opts = {});
LandmarkGraph load_landmark_graph(const std::filesystem::path& path,
                                  const GraphLoadOptions& opts = {});
std::string dump_landmark_graph(const LandmarkGraph& graph);

/// Copy of `graph` with every landmark moved to `floor` and `id_suffix`
/// appended to each id; planar layout is unchanged.
LandmarkGraph relabel_floor(const LandmarkGraph& graph, int floor, const std::string& id_suffix);

// ---------------------------------------------------------------------------

struct LandmarkEvent {
    double t = 0;
    RuleKind kind = RuleKind::Accelerometer;
    /// Gyroscope: integrated signed turn (rad). Baro: pressure change across
    /// the vertical run (hPa). Accelerometer: still duration (s).
    double auxiliary = 0;
};

struct LandmarkConfig {
    double gyro_threshold = 1.1;  ///< rad/s
    int gyro_window = 10;         ///< samples
    double baro_flat = 0.05;      ///< hPa, horizontal-movement threshold
    double baro_delta = 0.3;      ///< hPa, vertical-movement threshold
    double baro_window = 1.0;     ///< s, tumbling pressure windows
    double walking_min = 2.0;     ///< s, K1
    double still_min = 1.0;       ///< s, K2 lower bound
    double still_max = 8.0;       ///< s, K2 upper bound

    void validate() const;
};

/// Walking(>= K1) -> Still(K2 range) -> Walking(>= K1); event at the Still start.
std::vector<LandmarkEvent> detect_acc_landmarks(std::span<const MotionLabel> motion,
                                                const LandmarkConfig& cfg);

std::vector<LandmarkEvent> detect_gyro_landmarks(const SensorTrace& trace,
                                                 const LandmarkConfig& cfg);

/// Sign function over a pressure delta.
int sgn(double delta);

/// Mean pressure per tumbling window; window i starts at t0 + i * cfg.baro_window.
struct PressureWindow {
    double t_start = 0;
    double t_end = 0;
    double mean = 0;
};
std::vector<PressureWindow> pressure_windows(std::span<const BaroSample> baro, double width);

/// Rules over a window-mean sequence. Entrance events are stamped at the end
/// of the last flat window, exits at the start of the first settled window.
std::vector<LandmarkEvent> detect_baro_landmarks(std::span<const PressureWindow> windows,
                                                 const LandmarkConfig& cfg);
std::vector<LandmarkEvent> detect_baro_landmarks(const SensorTrace& trace,
                                                 const LandmarkConfig& cfg);

/// Drops gyroscope events that fall inside a Still interval.
std::vector<LandmarkEvent> suppress_still_turns(std::vector<LandmarkEvent> events,
                                                std::span<const MotionLabel> motion);

/// Every detector over one trace, time-ordered.
std::vector<LandmarkEvent> detect_landmarks(const SensorTrace& trace,
                                            std::span<const MotionLabel> motion,
                                            const LandmarkConfig& cfg);

}  // namespace fpmap
