#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fpmap/angles.hpp"
#include "fpmap/landmarks.hpp"
#include "fpmap/sensors.hpp"

namespace fpmap {

enum class PoseKind { Start, Step, Snap };

struct Pose {
    double t = 0;
    double x = 0, y = 0;
    double floor = 0;  ///< continuous floor coordinate
    int level = 0;     ///< integer-snapped floor
    PoseKind kind = PoseKind::Step;
    std::optional<double> periodicity;  ///< steps only
    std::optional<LandmarkId> landmark;  ///< snap points and a start on a landmark
    int segment = 0;
};

/// Nearest integer floor; exact .5 ties go toward `previous`.
int snap_floor(double floor, int previous);

enum class HeadingSource { Compass, Gyro, LandmarkGraphAssisted };

std::string heading_source_name(HeadingSource s);
HeadingSource parse_heading_source(const std::string& name);

struct PdrConfig {
    double step_length = 0.63;                    ///< m, initial step length
    double pressure_per_floor = 0.45;             ///< hPa
    double heading_threshold = deg_to_rad(30.0);  ///< rad
    double confidence_threshold = 0.25;
    double distance_floor = 0.1;  ///< m, clamp of the distance-agreement denominator
    int max_hops = 3;             ///< graph reach when looking past missed landmarks
    int min_steps_for_length = 3;
    double compass_window = 0.3;  ///< s of azimuth samples averaged per step
    HeadingSource heading_source = HeadingSource::LandmarkGraphAssisted;

    void validate() const;
};

struct PathPoint {
    double t = 0;
    double x = 0, y = 0;
    int level = 0;
};

struct PathSegment {
    std::vector<PathPoint> points;
    std::vector<double> periodicities;
    std::optional<LandmarkId> start_landmark;
    std::optional<LandmarkId> end_landmark;
};

struct LandmarkVisit {
    double t = 0;
    LandmarkId id;
    double confidence = 0;
};

struct Trajectory {
    std::vector<Pose> poses;
    std::vector<PathSegment> segments;
    std::vector<LandmarkVisit> landmark_visits;
    int missed_step_anomalies = 0;

    bool empty() const { return poses.empty(); }
};

/// One dead-reckoning step; floor and time are carried over.
Pose pdr_step(const Pose& prev, double step_length, double heading);

double floor_update(double prev_floor, double p_now, double p_prev, double pressure_per_floor);

struct StepLengthUpdate {
    double length = 0;
    bool anomaly = false;  ///< no steps between the landmarks; previous length kept
};

StepLengthUpdate update_step_length(const Landmark& from, const Landmark& to, int steps,
                                    double previous_length);

/// Detected rule, with the turn sign taken from a gyroscope event's integrated angle.
Rule detected_rule(const LandmarkEvent& event);

/// Product of rule agreement, heading gate and inverse distance disagreement.
double landmark_confidence(const Landmark& candidate, const Rule& detected, double est_heading,
                           double ref_heading, double traveled, double ref_distance,
                           const PdrConfig& cfg);

/// Where dead reckoning stands relative to its last calibration.
struct MatchContext {
    std::optional<LandmarkId> anchor;  ///< last matched landmark, if any
    double anchor_x = 0, anchor_y = 0;
    int level = 0;
    double traveled = 0;                ///< m since the anchor
    std::optional<double> mean_heading;  ///< circular mean of step headings since the anchor
};

struct LandmarkCandidate {
    const Landmark* landmark = nullptr;
    double ref_heading = 0;
    double ref_distance = 0;
    int hops = 0;  ///< 0 when unanchored
};

/// Successors of the anchor within cfg.max_hops (shortest path distance), or
/// every landmark on the current floor when unanchored. Candidates more than
/// one hop away must share the current floor.
std::vector<LandmarkCandidate> match_candidates(const LandmarkGraph& graph,
                                                const MatchContext& ctx, const PdrConfig& cfg);

struct LandmarkMatch {
    LandmarkCandidate candidate;
    double confidence = 0;
};

std::optional<LandmarkMatch> match_landmark(const LandmarkEvent& event, const LandmarkGraph& graph,
                                            const MatchContext& ctx, const PdrConfig& cfg);

/// Calibrated dead reckoning over a whole trace. Throws ValidationError when the
/// trace has no accelerometer channel.
Trajectory run_pdr(const SensorTrace& trace, const LandmarkGraph& graph, const Pose& initial,
                   const PdrConfig& cfg, const SensorConfig& sensor_cfg,
                   const LandmarkConfig& landmark_cfg);

/// Horizontal distance from each pose to the linearly interpolated ground truth.
std::vector<double> position_errors(const Trajectory& traj, std::span<const TruthSample> truth);

void write_trajectory(const Trajectory& traj, std::ostream& out);
void save_trajectory(const Trajectory& traj, const std::filesystem::path& path);
Trajectory parse_trajectory(std::istream& in);
Trajectory load_trajectory(const std::filesystem::path& path);

}  // namespace fpmap
