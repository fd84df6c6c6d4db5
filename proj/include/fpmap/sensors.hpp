#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace fpmap {

struct AccelSample {
    double t = 0;  // s
    double ax = 0, ay = 0, az = 0;  // m/s^2
};

struct GyroSample {
    double t = 0;
    double wx = 0, wy = 0, wz = 0;  // rad/s
};

struct MagSample {
    double t = 0;
    double mx = 0, my = 0, mz = 0;  // uT
};

struct BaroSample {
    double t = 0;
    double pressure = 0;  // hPa
};

struct RssReading {
    std::string mac;
    int rss = 0;  // dBm

    bool operator==(const RssReading&) const = default;
};

/// MAC -> RSS (dBm). Ordered so that iteration and serialization are deterministic.
using Fingerprint = std::map<std::string, int>;

struct WifiScan {
    double t = 0;
    std::vector<RssReading> readings;

    Fingerprint fingerprint() const;
};

struct TruthSample {
    double t = 0;
    double x = 0, y = 0;
    int floor = 0;
};

using SensorRecord =
    std::variant<AccelSample, GyroSample, MagSample, BaroSample, WifiScan, TruthSample>;

/// Channel-separated sensor recording. Channels are independent; each is
/// time-ordered on its own and never resampled against the others.
struct SensorTrace {
    std::vector<AccelSample> accel;
    std::vector<GyroSample> gyro;
    std::vector<MagSample> mag;
    std::vector<BaroSample> baro;
    std::vector<WifiScan> wifi;
    std::vector<TruthSample> truth;

    bool empty() const;
    std::size_t size() const;

    /// All records interleaved by time; equal times keep channel order
    /// accel, gyro, mag, baro, wifi, truth.
    std::vector<SensorRecord> merged() const;
};

/// Throws ValidationError naming the channel on the first broken invariant.
void validate(const SensorTrace& trace);

/// True for six colon-separated hex octets, e.g. "aa:bb:cc:dd:ee:ff".
bool is_valid_mac(const std::string& mac);

SensorTrace parse_trace(std::istream& in);
SensorTrace load_trace(const std::filesystem::path& path);
void write_trace(const SensorTrace& trace, std::ostream& out);
void save_trace(const SensorTrace& trace, const std::filesystem::path& path);

// ---------------------------------------------------------------------------

enum class MotionState { Walking, Still };

struct MotionLabel {
    double t = 0;  ///< end time of the window the label summarizes
    MotionState state = MotionState::Still;
};

struct StepEvent {
    double t = 0;                       ///< peak time
    std::optional<double> periodicity;  ///< gap to the previous accepted peak
    double accel_variance = 0;          ///< (m/s^2)^2 over the detection window
};

struct SensorConfig {
    int acc_window = 50;              ///< samples per variance window
    double variance_threshold = 0.5;  ///< (m/s^2)^2, walking vs still
    int motion_hop = 10;              ///< samples between motion labels
    int smoothing_width = 5;          ///< centered moving average for peak picking
    double min_step_gap = 0.3;        ///< s, refractory interval between peaks
    /// A peak must rise this many window standard deviations above the window mean.
    double peak_prominence = 0.5;

    void validate() const;
};

double accel_magnitude(const AccelSample& s);

/// Horizontal-field azimuth of a flat-held device, radians CCW from map +x in [0, 2pi).
double compass_azimuth(const MagSample& s);

/// Median gap between consecutive timestamps; 0 for fewer than two.
double median_interval(std::span<const double> times);

std::vector<MotionLabel> classify_motion(const SensorTrace& trace, const SensorConfig& cfg);
std::vector<StepEvent> detect_steps(const SensorTrace& trace, const SensorConfig& cfg);

/// Motion state at time t: the label of the latest window ending at or before t
/// (the first label when t precedes every window).
std::optional<MotionState> motion_at(std::span<const MotionLabel> labels, double t);

}  // namespace fpmap
