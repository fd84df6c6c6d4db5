#include "fpmap/sensors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fpmap/angles.hpp"
#include "fpmap/error.hpp"

namespace fpmap {

using nlohmann::json;

Fingerprint WifiScan::fingerprint() const {
    Fingerprint fp;
    for (const auto& r : readings) fp[r.mac] = r.rss;
    return fp;
}

bool SensorTrace::empty() const { return size() == 0; }

std::size_t SensorTrace::size() const {
    return accel.size() + gyro.size() + mag.size() + baro.size() + wifi.size() + truth.size();
}

namespace {

double record_time(const SensorRecord& r) {
    return std::visit([](const auto& s) { return s.t; }, r);
}

template <typename Samples>
void append_records(const Samples& samples, std::vector<SensorRecord>& out) {
    for (const auto& s : samples) out.emplace_back(s);
}

template <typename Samples>
void check_monotone(const Samples& samples, const char* channel) {
    for (std::size_t i = 1; i < samples.size(); ++i) {
        if (samples[i].t < samples[i - 1].t) {
            std::ostringstream msg;
            msg << "channel '" << channel << "': timestamp regression " << samples[i - 1].t
                << " -> " << samples[i].t;
            throw ValidationError(msg.str());
        }
    }
}

void check_scan(const WifiScan& scan) {
    std::set<std::string> seen;
    for (const auto& r : scan.readings) {
        if (!is_valid_mac(r.mac))
            throw ValidationError("channel 'wifi': malformed MAC '" + r.mac + "'");
        if (r.rss > 0)
            throw ValidationError("channel 'wifi': positive RSS " + std::to_string(r.rss) +
                                  " for " + r.mac);
        if (!seen.insert(r.mac).second)
            throw ValidationError("channel 'wifi': duplicate MAC " + r.mac + " in one scan");
    }
}

double number_at(const json& v, std::size_t i, std::size_t line) {
    if (!v.is_array() || i >= v.size() || !v[i].is_number())
        throw ParseError("expected numeric component " + std::to_string(i) + " in \"v\"", line);
    return v[i].get<double>();
}

void expect_arity(const json& v, std::size_t n, std::size_t line) {
    if (!v.is_array() || v.size() != n)
        throw ParseError("\"v\" must be an array of " + std::to_string(n) + " numbers", line);
}

template <typename Samples, typename Sample>
void push_checked(Samples& samples, Sample s, const char* channel, std::size_t line) {
    if (!samples.empty() && s.t < samples.back().t) {
        std::ostringstream msg;
        msg << "channel '" << channel << "': timestamp regression " << samples.back().t << " -> "
            << s.t << " at line " << line;
        throw ValidationError(msg.str());
    }
    samples.push_back(std::move(s));
}

void parse_line(const json& j, std::size_t line, SensorTrace& trace) {
    if (!j.is_object()) throw ParseError("record must be a JSON object", line);
    const auto ch_it = j.find("ch");
    const auto t_it = j.find("t");
    const auto v_it = j.find("v");
    if (ch_it == j.end() || !ch_it->is_string()) throw ParseError("missing string \"ch\"", line);
    if (t_it == j.end() || !t_it->is_number()) throw ParseError("missing numeric \"t\"", line);
    if (v_it == j.end()) throw ParseError("missing \"v\"", line);
    const std::string ch = ch_it->get<std::string>();
    const double t = t_it->get<double>();
    if (!std::isfinite(t)) throw ParseError("non-finite timestamp", line);
    const json& v = *v_it;

    if (ch == "accel") {
        expect_arity(v, 3, line);
        push_checked(trace.accel,
                     AccelSample{t, number_at(v, 0, line), number_at(v, 1, line),
                                 number_at(v, 2, line)},
                     "accel", line);
    } else if (ch == "gyro") {
        expect_arity(v, 3, line);
        push_checked(trace.gyro,
                     GyroSample{t, number_at(v, 0, line), number_at(v, 1, line),
                                number_at(v, 2, line)},
                     "gyro", line);
    } else if (ch == "mag") {
        expect_arity(v, 3, line);
        push_checked(trace.mag,
                     MagSample{t, number_at(v, 0, line), number_at(v, 1, line),
                               number_at(v, 2, line)},
                     "mag", line);
    } else if (ch == "baro") {
        if (!v.is_number()) throw ParseError("baro \"v\" must be a number", line);
        push_checked(trace.baro, BaroSample{t, v.get<double>()}, "baro", line);
    } else if (ch == "wifi") {
        if (!v.is_array()) throw ParseError("wifi \"v\" must be an array", line);
        WifiScan scan{t, {}};
        for (const auto& pair : v) {
            if (!pair.is_array() || pair.size() != 2 || !pair[0].is_string() ||
                !pair[1].is_number_integer())
                throw ParseError("wifi reading must be [\"mac\", rss_int]", line);
            scan.readings.push_back({pair[0].get<std::string>(), pair[1].get<int>()});
        }
        try {
            check_scan(scan);
        } catch (const ValidationError& e) {
            throw ValidationError(std::string(e.what()) + " at line " + std::to_string(line));
        }
        push_checked(trace.wifi, std::move(scan), "wifi", line);
    } else if (ch == "truth") {
        expect_arity(v, 3, line);
        if (!v[2].is_number_integer()) throw ParseError("truth floor must be an integer", line);
        push_checked(trace.truth,
                     TruthSample{t, number_at(v, 0, line), number_at(v, 1, line), v[2].get<int>()},
                     "truth", line);
    } else {
        throw ParseError("unknown channel \"" + ch + "\"", line);
    }
}

json to_json(const SensorRecord& r) {
    return std::visit(
        [](const auto& s) -> json {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, AccelSample>)
                return {{"ch", "accel"}, {"t", s.t}, {"v", {s.ax, s.ay, s.az}}};
            else if constexpr (std::is_same_v<T, GyroSample>)
                return {{"ch", "gyro"}, {"t", s.t}, {"v", {s.wx, s.wy, s.wz}}};
            else if constexpr (std::is_same_v<T, MagSample>)
                return {{"ch", "mag"}, {"t", s.t}, {"v", {s.mx, s.my, s.mz}}};
            else if constexpr (std::is_same_v<T, BaroSample>)
                return {{"ch", "baro"}, {"t", s.t}, {"v", s.pressure}};
            else if constexpr (std::is_same_v<T, WifiScan>) {
                json readings = json::array();
                for (const auto& r : s.readings) readings.push_back({r.mac, r.rss});
                return {{"ch", "wifi"}, {"t", s.t}, {"v", readings}};
            } else {
                return {{"ch", "truth"}, {"t", s.t}, {"v", {s.x, s.y, s.floor}}};
            }
        },
        r);
}

double population_variance(std::span<const double> v, double* mean_out = nullptr) {
    if (v.empty()) return 0;
    double mean = 0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double acc = 0;
    for (double x : v) acc += (x - mean) * (x - mean);
    if (mean_out) *mean_out = mean;
    return acc / static_cast<double>(v.size());
}

}  // namespace

std::vector<SensorRecord> SensorTrace::merged() const {
    std::vector<SensorRecord> out;
    out.reserve(size());
    append_records(accel, out);
    append_records(gyro, out);
    append_records(mag, out);
    append_records(baro, out);
    append_records(wifi, out);
    append_records(truth, out);
    std::stable_sort(out.begin(), out.end(), [](const SensorRecord& a, const SensorRecord& b) {
        return record_time(a) < record_time(b);
    });
    return out;
}

bool is_valid_mac(const std::string& mac) {
    if (mac.size() != 17) return false;
    for (std::size_t i = 0; i < mac.size(); ++i) {
        if (i % 3 == 2) {
            if (mac[i] != ':') return false;
        } else if (!std::isxdigit(static_cast<unsigned char>(mac[i]))) {
            return false;
        }
    }
    return true;
}

void validate(const SensorTrace& trace) {
    check_monotone(trace.accel, "accel");
    check_monotone(trace.gyro, "gyro");
    check_monotone(trace.mag, "mag");
    check_monotone(trace.baro, "baro");
    check_monotone(trace.wifi, "wifi");
    check_monotone(trace.truth, "truth");
    for (const auto& scan : trace.wifi) check_scan(scan);
}

SensorTrace parse_trace(std::istream& in) {
    SensorTrace trace;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (std::all_of(text.begin(), text.end(),
                        [](unsigned char c) { return std::isspace(c); }))
            continue;
        json j;
        try {
            j = json::parse(text);
        } catch (const json::parse_error& e) {
            throw ParseError(std::string("malformed JSON: ") + e.what(), line);
        }
        parse_line(j, line, trace);
    }
    return trace;
}

SensorTrace load_trace(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open trace file " + path.string());
    return parse_trace(in);
}

void write_trace(const SensorTrace& trace, std::ostream& out) {
    for (const auto& r : trace.merged()) out << to_json(r).dump() << '\n';
}

void save_trace(const SensorTrace& trace, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write trace file " + path.string());
    write_trace(trace, out);
    if (!out) throw Error("failed writing trace file " + path.string());
}

void SensorConfig::validate() const {
    if (acc_window <= 0 || motion_hop <= 0 || smoothing_width <= 0)
        throw ValidationError("sensor windows must be positive");
    if (variance_threshold <= 0 || min_step_gap <= 0 || peak_prominence < 0)
        throw ValidationError("sensor thresholds must be positive");
}

double accel_magnitude(const AccelSample& s) {
    return std::sqrt(s.ax * s.ax + s.ay * s.ay + s.az * s.az);
}

double compass_azimuth(const MagSample& s) { return wrap_two_pi(std::atan2(-s.my, s.mx)); }

double median_interval(std::span<const double> times) {
    if (times.size() < 2) return 0;
    std::vector<double> gaps;
    gaps.reserve(times.size() - 1);
    for (std::size_t i = 1; i < times.size(); ++i) gaps.push_back(times[i] - times[i - 1]);
    auto mid = gaps.begin() + static_cast<std::ptrdiff_t>(gaps.size() / 2);
    std::nth_element(gaps.begin(), mid, gaps.end());
    if (gaps.size() % 2 == 1) return *mid;
    const double upper = *mid;
    const double lower = *std::max_element(gaps.begin(), mid);
    return 0.5 * (lower + upper);
}

std::vector<MotionLabel> classify_motion(const SensorTrace& trace, const SensorConfig& cfg) {
    cfg.validate();
    const auto n = trace.accel.size();
    const auto w = static_cast<std::size_t>(cfg.acc_window);
    std::vector<MotionLabel> labels;
    if (n < w) return labels;

    std::vector<double> mag(n);
    for (std::size_t i = 0; i < n; ++i) mag[i] = accel_magnitude(trace.accel[i]);

    for (std::size_t end = w - 1; end < n; end += static_cast<std::size_t>(cfg.motion_hop)) {
        const double var = population_variance(std::span(mag).subspan(end + 1 - w, w));
        labels.push_back({trace.accel[end].t,
                          var > cfg.variance_threshold ? MotionState::Walking : MotionState::Still});
    }
    return labels;
}

std::vector<StepEvent> detect_steps(const SensorTrace& trace, const SensorConfig& cfg) {
    cfg.validate();
    const auto& acc = trace.accel;
    const auto n = acc.size();
    std::vector<StepEvent> steps;
    if (n < 3) return steps;

    std::vector<double> mag(n);
    for (std::size_t i = 0; i < n; ++i) mag[i] = accel_magnitude(acc[i]);

    // Centered moving average, truncated at the ends.
    const auto half = static_cast<std::ptrdiff_t>(cfg.smoothing_width / 2);
    std::vector<double> smooth(n);
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        const auto lo = std::max<std::ptrdiff_t>(0, i - half);
        const auto hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(n) - 1, i + half);
        double sum = 0;
        for (auto k = lo; k <= hi; ++k) sum += mag[static_cast<std::size_t>(k)];
        smooth[static_cast<std::size_t>(i)] = sum / static_cast<double>(hi - lo + 1);
    }

    const auto w = std::min<std::size_t>(static_cast<std::size_t>(cfg.acc_window), n);
    std::vector<double> peak_value;  // smoothed height of each accepted step

    for (std::size_t k = 1; k + 1 < n; ++k) {
        if (!(smooth[k] > smooth[k - 1] && smooth[k] > smooth[k + 1])) continue;

        // Window of w samples centered on k, shifted to stay inside the trace.
        std::size_t start = k >= w / 2 ? k - w / 2 : 0;
        if (start + w > n) start = n - w;
        double mean = 0;
        const double var = population_variance(std::span(mag).subspan(start, w), &mean);
        if (var <= cfg.variance_threshold) continue;
        if (smooth[k] < mean + cfg.peak_prominence * std::sqrt(var)) continue;

        const double t = acc[k].t;
        if (!steps.empty() && t - steps.back().t < cfg.min_step_gap) {
            if (smooth[k] <= peak_value.back()) continue;
            steps.pop_back();
            peak_value.pop_back();
        }
        StepEvent ev{t, std::nullopt, var};
        if (!steps.empty()) ev.periodicity = t - steps.back().t;
        steps.push_back(ev);
        peak_value.push_back(smooth[k]);
    }
    return steps;
}

std::optional<MotionState> motion_at(std::span<const MotionLabel> labels, double t) {
    if (labels.empty()) return std::nullopt;
    auto it = std::upper_bound(labels.begin(), labels.end(), t,
                               [](double v, const MotionLabel& l) { return v < l.t; });
    if (it == labels.begin()) return labels.front().state;
    return std::prev(it)->state;
}

}  // namespace fpmap
