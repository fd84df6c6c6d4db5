#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fpmap/pdr.hpp"
#include "fpmap/sensors.hpp"

namespace fpmap {

struct QualityConfig {
    double t_min = 0.4;  ///< s
    double t_max = 1.0;  ///< s
    double belief_threshold = 15.0;
    double sigma_floor = 0.005;  ///< s
    /// Optional upper gate (strict) used to build deliberately low-quality maps.
    std::optional<double> belief_ceiling;

    void validate() const;
};

/// 1 iff the periodicity lies in [t_min, t_max].
int chi(double periodicity, const QualityConfig& cfg);

/// nullopt when fewer than two periodicities are available.
std::optional<double> segment_belief(std::span<const double> periodicities, const QualityConfig& cfg);
std::optional<double> segment_belief(const PathSegment& seg, const QualityConfig& cfg);

struct PlanarPoint {
    double x = 0, y = 0;
};

/// Linear interpolation between two timed poses. Throws ContractViolation
/// when t lies outside [before.t, after.t].
PlanarPoint interpolate_rp(double t, const PathPoint& before, const PathPoint& after);

struct RadioMapEntry {
    double x = 0, y = 0;
    int floor = 0;
    Fingerprint fingerprint;
    double belief = 0;  ///< belief of the sourcing segment
    double t = 0;       ///< scan time
    int segment = 0;

    bool operator==(const RadioMapEntry&) const = default;
};

struct RadioMap {
    std::vector<RadioMapEntry> entries;
    std::map<std::string, double> config;  ///< quality settings used to build the map

    bool empty() const { return entries.empty(); }
    bool operator==(const RadioMap&) const = default;
};

struct SegmentReport {
    int segment = 0;
    std::optional<double> belief;
    int scans = 0;     ///< scans located inside the segment
    int accepted = 0;  ///< scans that made it into the map
};

struct BuildReport {
    std::vector<SegmentReport> segments;
    int dropped_outside = 0;        ///< scans not bracketed by poses of one segment
    std::vector<std::string> warnings;
};

RadioMap build_radio_map(const Trajectory& traj, std::span<const WifiScan> scans,
                         const QualityConfig& cfg, BuildReport* report = nullptr);

/// Concatenation ordered by scan time (stable for equal times).
RadioMap merge_radio_maps(std::span<const RadioMap> maps);

std::string dump_radio_map(const RadioMap& map);
RadioMap parse_radio_map(const std::string& json_text);
void save_radio_map(const RadioMap& map, const std::filesystem::path& path);
RadioMap load_radio_map(const std::filesystem::path& path);

}  // namespace fpmap
