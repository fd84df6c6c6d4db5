#include "fpmap/sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <limits>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "fpmap/error.hpp"

namespace fpmap {

using nlohmann::json;

namespace {

constexpr double kRate = 50.0;       // accel / gyro / mag, Hz
constexpr double kBaroRate = 10.0;   // Hz
constexpr double kGravity = 9.81;
constexpr double kStepAmplitude = 2.0;
constexpr double kFieldH = 30.0;     // uT
constexpr double kFieldV = 40.0;     // uT
constexpr int kRssFloor = -100;

enum Channel : std::uint32_t { kAccel = 1, kGyro, kMag, kBaro, kWifi, kArm, kGait, kQueries };

std::mt19937_64 stream(std::uint64_t seed, Channel channel) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(channel)};
    return std::mt19937_64(seq);
}

double sample_time(long n) { return static_cast<double>(n) / kRate; }

/// Rounds a duration to a whole number of samples (at least `min_samples`).
long to_samples(double seconds, long min_samples = 1) {
    return std::max(min_samples, static_cast<long>(std::lround(seconds * kRate)));
}

double wrap_pi(double a) {
    a = wrap_two_pi(a);
    return a > std::numbers::pi ? a - kTwoPi : a;
}

struct Phase {
    enum Kind { Still, Pivot, Walk, Arm } kind = Still;
    long start = 0;   // samples
    long length = 0;  // samples
    double x0 = 0, y0 = 0, f0 = 0;
    double x1 = 0, y1 = 0, f1 = 0;
    double heading = 0;  // at phase start
    double turn = 0;     // pivot only
    std::vector<long> cycles;        // walk: step durations; arm: motion cycle durations (samples, even)
    std::vector<double> lengths;     // walk: step lengths
    std::vector<double> amplitudes;  // arm
    int leg = -1;
    bool ends_leg = false;

    long end() const { return start + length; }

    double total_length() const {
        double s = 0;
        for (double l : lengths) s += l;
        return s;
    }
};

struct TruthState {
    double x = 0, y = 0, floor = 0, heading = 0;
};

/// Walk-phase distance covered at time u (samples): the first half-step
/// covers one step length, then one step per peak-to-peak interval.
double walk_distance(const Phase& p, double u) {
    const auto n = p.cycles.size();
    double tau = static_cast<double>(p.start);
    double prev_peak = tau;
    double covered = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const double peak = tau + static_cast<double>(p.cycles[k]) / 2.0;
        if (u <= peak) {
            const double span = peak - prev_peak;
            const double w = span > 0 ? (u - prev_peak) / span : 1.0;
            return covered + p.lengths[k] * std::clamp(w, 0.0, 1.0);
        }
        covered += p.lengths[k];
        prev_peak = peak;
        tau += static_cast<double>(p.cycles[k]);
    }
    return covered;
}

TruthState truth_in(const Phase& p, double u) {
    TruthState s{p.x0, p.y0, p.f0, p.heading};
    switch (p.kind) {
        case Phase::Still:
        case Phase::Arm:
            break;
        case Phase::Pivot: {
            const double w = std::clamp((u - static_cast<double>(p.start)) / static_cast<double>(p.length), 0.0, 1.0);
            s.heading = wrap_two_pi(p.heading + p.turn * w);
            break;
        }
        case Phase::Walk: {
            const double total = p.total_length();
            const double w = total > 0 ? walk_distance(p, u) / total : 0.0;
            s.x = p.x0 + (p.x1 - p.x0) * w;
            s.y = p.y0 + (p.y1 - p.y0) * w;
            s.floor = p.f0 + (p.f1 - p.f0) * w;
            break;
        }
    }
    return s;
}

double walk_accel(const Phase& p, long i) {
    long tau = p.start;
    for (std::size_t k = 0; k < p.cycles.size(); ++k) {
        if (i < tau + p.cycles[k]) {
            const double phase = static_cast<double>(i - tau) / static_cast<double>(p.cycles[k]);
            const double amp = p.kind == Phase::Arm ? p.amplitudes[k] : kStepAmplitude;
            return kGravity - amp * std::cos(2 * std::numbers::pi * phase);
        }
        tau += p.cycles[k];
    }
    return kGravity;
}

class Timeline {
public:
    explicit Timeline(std::vector<Phase> phases) : phases_(std::move(phases)) {}

    const std::vector<Phase>& phases() const { return phases_; }
    long end() const { return phases_.empty() ? 0 : phases_.back().end(); }

    /// Phase covering sample time u; the last phase past the end.
    const Phase& at(double u) const {
        auto it = std::upper_bound(phases_.begin(), phases_.end(), u,
                                   [](double v, const Phase& p) { return v < static_cast<double>(p.start); });
        if (it == phases_.begin()) return phases_.front();
        return *std::prev(it);
    }

    TruthState truth(double u) const { return truth_in(at(u), u); }

private:
    std::vector<Phase> phases_;
};

void validate_script(const Environment& env, const WalkScript& script) {
    if (script.waypoints.size() < 2) throw ValidationError("walk script needs at least two waypoints");
    for (const auto& w : script.waypoints)
        if (!env.graph.find(w)) throw ValidationError("walk script references unknown landmark " + w);
    for (std::size_t i = 0; i + 1 < script.waypoints.size(); ++i)
        if (!env.graph.edge(script.waypoints[i], script.waypoints[i + 1]))
            throw ValidationError("walk script: no graph edge " + script.waypoints[i] + " -> " +
                                  script.waypoints[i + 1]);
    if (!(script.speed > 0 && script.step_length > 0)) throw ValidationError("speed and step length must be positive");
    if (!(script.scan_interval > 0)) throw ValidationError("scan_interval must be positive");
    if (!(script.turn_duration > 0)) throw ValidationError("turn_duration must be positive");
    for (const auto& s : script.styles)
        if (s.period_range && !(s.period_range->first > 0 && s.period_range->first <= s.period_range->second))
            throw ValidationError("period_range must satisfy 0 < lo <= hi");
}

const LegStyle* style_for(const WalkScript& script, int leg) {
    const LegStyle* found = nullptr;
    for (const auto& s : script.styles)
        if (leg >= s.first_leg && leg <= s.last_leg) found = &s;
    return found;
}

std::vector<Phase> build_phases(const Environment& env, const WalkScript& script, std::mt19937_64& gait,
                                int& scripted_steps) {
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::vector<Phase> phases;
    const auto& g = env.graph;
    const Landmark& first = g.at(script.waypoints.front());
    const Landmark& second = g.at(script.waypoints[1]);
    double heading = wrap_two_pi(std::atan2(second.y - first.y, second.x - first.x));

    auto still = [&](const Landmark& at, double seconds) {
        Phase p;
        p.kind = Phase::Still;
        p.length = to_samples(seconds);
        p.x0 = p.x1 = at.x;
        p.y0 = p.y1 = at.y;
        p.f0 = p.f1 = at.floor;
        p.heading = heading;
        phases.push_back(p);
    };
    auto stop_time = [&](const LandmarkId& id) {
        double total = 0;
        for (const auto& s : script.stops)
            if (s.at == id) total += s.duration;
        return total;
    };

    scripted_steps = 0;
    if (script.initial_still > 0) still(first, script.initial_still);
    const double nominal = script.step_length / script.speed;
    for (std::size_t i = 0; i + 1 < script.waypoints.size(); ++i) {
        const Landmark& a = g.at(script.waypoints[i]);
        const Landmark& b = g.at(script.waypoints[i + 1]);
        const double leg_heading = wrap_two_pi(std::atan2(b.y - a.y, b.x - a.x));
        if (i > 0) {
            if (const double pause = stop_time(a.id); pause > 0) still(a, pause);
            double turn = wrap_pi(leg_heading - heading);
            if (std::abs(std::abs(turn) - std::numbers::pi) < 1e-9) turn = std::numbers::pi;
            if (std::abs(turn) > 1e-9) {
                Phase p;
                p.kind = Phase::Pivot;
                p.length = to_samples(script.turn_duration);
                p.x0 = p.x1 = a.x;
                p.y0 = p.y1 = a.y;
                p.f0 = p.f1 = a.floor;
                p.heading = heading;
                p.turn = turn;
                phases.push_back(p);
            }
        }
        heading = leg_heading;

        const double leg_len = std::hypot(b.x - a.x, b.y - a.y);
        const int steps = std::max(1, static_cast<int>(std::ceil(leg_len / script.step_length - 1e-9)));
        const LegStyle* style = style_for(script, static_cast<int>(i));
        Phase w;
        w.kind = Phase::Walk;
        w.x0 = a.x;
        w.y0 = a.y;
        w.f0 = a.floor;
        w.x1 = b.x;
        w.y1 = b.y;
        w.f1 = b.floor;
        w.heading = heading;
        w.leg = static_cast<int>(i);
        w.ends_leg = true;
        double weight_sum = 0;
        for (int k = 0; k < steps; ++k) {
            double period = nominal;
            if (style && style->period_range) {
                std::uniform_real_distribution<double> range(style->period_range->first,
                                                             style->period_range->second);
                period = range(gait);
            } else {
                const double jitter = style ? style->period_jitter : script.period_jitter;
                if (jitter > 0) period = nominal * (1 + jitter * unit(gait));
            }
            // Whole sample pairs keep every peak on a sample instant.
            w.cycles.push_back(2 * std::max(1L, std::lround(period * kRate / 2.0)));
            const double lj = style ? style->length_jitter : 0.0;
            const double weight = lj > 0 ? 1 + lj * unit(gait) : 1.0;
            w.lengths.push_back(weight);
            weight_sum += weight;
        }
        for (auto& l : w.lengths) l *= leg_len / weight_sum;
        for (long c : w.cycles) w.length += c;
        scripted_steps += steps;
        phases.push_back(std::move(w));
    }
    const Landmark& last = g.at(script.waypoints.back());
    if (const double pause = stop_time(last.id); pause > 0) still(last, pause);
    still(last, std::max(script.final_still, 1.0 / kRate));
    return phases;
}

void assign_starts(std::vector<Phase>& phases) {
    long t = 0;
    for (auto& p : phases) {
        p.start = t;
        t += p.length;
    }
}

/// Splits walks and inserts arm-motion phases for each false-walking episode.
void insert_false_walking(std::vector<Phase>& phases, const WalkScript& script, std::mt19937_64& arm) {
    auto episodes = script.false_walking;
    std::sort(episodes.begin(), episodes.end(), [](const auto& a, const auto& b) { return a.t < b.t; });
    std::uniform_real_distribution<double> cycle(0.3, 1.4);
    std::uniform_real_distribution<double> amplitude(1.0, 2.5);
    // Episode times refer to the unshifted script clock.
    long shift = 0;
    for (const auto& ep : episodes) {
        assign_starts(phases);
        const long at = to_samples(ep.t, 0) + shift;
        auto it = std::find_if(phases.begin(), phases.end(), [&](const Phase& p) { return at < p.end(); });
        if (it == phases.end()) it = std::prev(phases.end());

        Phase motion;
        motion.kind = Phase::Arm;
        long filled = 0;
        const long target = to_samples(ep.duration);
        while (filled < target) {
            const long c = 2 * std::max(1L, std::lround(cycle(arm) * kRate / 2.0));
            motion.cycles.push_back(c);
            motion.amplitudes.push_back(amplitude(arm));
            filled += c;
        }
        motion.length = filled;
        shift += filled;

        std::size_t insert_at = static_cast<std::size_t>(it - phases.begin()) + 1;
        if (it->kind == Phase::Walk && it->cycles.size() >= 2) {
            // Split after the last peak at or before the episode start.
            long tau = it->start;
            std::size_t m = 0;
            for (std::size_t k = 0; k < it->cycles.size(); ++k) {
                if (tau + it->cycles[k] / 2 > at) break;
                tau += it->cycles[k];
                m = k + 1;
            }
            m = std::clamp<std::size_t>(m, 1, it->cycles.size() - 1);
            Phase head = *it;
            Phase tail = *it;
            head.cycles.assign(it->cycles.begin(), it->cycles.begin() + static_cast<long>(m));
            head.lengths.assign(it->lengths.begin(), it->lengths.begin() + static_cast<long>(m));
            tail.cycles.assign(it->cycles.begin() + static_cast<long>(m), it->cycles.end());
            tail.lengths.assign(it->lengths.begin() + static_cast<long>(m), it->lengths.end());
            const double w = head.total_length() / it->total_length();
            head.x1 = tail.x0 = it->x0 + (it->x1 - it->x0) * w;
            head.y1 = tail.y0 = it->y0 + (it->y1 - it->y0) * w;
            head.f1 = tail.f0 = it->f0 + (it->f1 - it->f0) * w;
            head.ends_leg = false;
            head.length = tail.length = 0;
            for (long c : head.cycles) head.length += c;
            for (long c : tail.cycles) tail.length += c;
            motion.x0 = motion.x1 = head.x1;
            motion.y0 = motion.y1 = head.y1;
            motion.f0 = motion.f1 = head.f1;
            motion.heading = head.heading;
            const auto pos = it - phases.begin();
            phases[static_cast<std::size_t>(pos)] = head;
            phases.insert(phases.begin() + pos + 1, tail);
            insert_at = static_cast<std::size_t>(pos) + 1;
        } else {
            const TruthState end = truth_in(*it, static_cast<double>(it->end()));
            motion.x0 = motion.x1 = end.x;
            motion.y0 = motion.y1 = end.y;
            motion.f0 = motion.f1 = end.floor;
            motion.heading = it->kind == Phase::Pivot ? wrap_two_pi(it->heading + it->turn) : it->heading;
        }
        phases.insert(phases.begin() + static_cast<long>(insert_at), motion);
    }
    assign_starts(phases);
}

double compass_bias_deg(const NoiseModel& noise, double x, double y, int floor) {
    double bias = 0;
    for (const auto& z : noise.compass_zones) {
        if (z.floor && *z.floor != floor) continue;
        if (x >= z.x_min && x <= z.x_max && y >= z.y_min && y <= z.y_max) bias += z.offset_deg;
    }
    return bias;
}

}  // namespace

double model_rss(const AccessPoint& ap, double x, double y, double floor, const Environment& env) {
    const double dz = (floor - ap.floor) * env.floor_height;
    const double d = std::sqrt((x - ap.x) * (x - ap.x) + (y - ap.y) * (y - ap.y) + dz * dz);
    return ap.tx_power - 10.0 * ap.path_loss_exponent * std::log10(std::max(d, 1.0)) -
           env.floor_attenuation * std::abs(floor - ap.floor);
}

Fingerprint model_fingerprint(const Environment& env, double x, double y, double floor,
                              const std::vector<double>& shadowing) {
    Fingerprint fp;
    for (std::size_t i = 0; i < env.aps.size(); ++i) {
        const double s = i < shadowing.size() ? shadowing[i] : 0.0;
        const long rss = std::lround(model_rss(env.aps[i], x, y, floor, env) - s);
        if (rss < kRssFloor) continue;
        fp[env.aps[i].mac] = static_cast<int>(std::min(rss, 0L));
    }
    return fp;
}

SimulatedWalk generate_trace(const Environment& env, const WalkScript& script, const NoiseModel& noise) {
    validate_script(env, script);
    if (noise.accel_std < 0 || noise.gyro_std < 0 || noise.compass_std_deg < 0 || noise.baro_std < 0 ||
        noise.rss_shadowing < 0)
        throw ValidationError("noise standard deviations must be non-negative");

    auto gait = stream(noise.seed, kGait);
    auto arm = stream(noise.seed, kArm);
    SimulatedWalk out;
    auto phases = build_phases(env, script, gait, out.scripted_steps);
    insert_false_walking(phases, script, arm);
    const Timeline timeline(std::move(phases));
    const long n_end = timeline.end();

    const Landmark& first = env.graph.at(script.waypoints.front());
    out.initial.t = 0;
    out.initial.x = first.x;
    out.initial.y = first.y;
    out.initial.floor = first.floor;
    out.initial.level = first.floor;
    out.initial.kind = PoseKind::Start;

    // Waypoint arrivals: last peak of the walk that closes each leg.
    std::set<long> truth_marks;
    for (const auto& p : timeline.phases()) {
        truth_marks.insert(p.start);
        if (p.kind != Phase::Walk) continue;
        long tau = p.start;
        for (long c : p.cycles) {
            truth_marks.insert(tau + c / 2);
            tau += c;
        }
        if (p.ends_leg) {
            const long last_peak = p.end() - p.cycles.back() / 2;
            out.visits.push_back({sample_time(last_peak), script.waypoints[static_cast<std::size_t>(p.leg) + 1]});
        }
    }
    for (long n = 0; n <= n_end; n += static_cast<long>(kRate)) truth_marks.insert(n);
    truth_marks.insert(n_end);

    SensorTrace& trace = out.trace;
    auto accel_rng = stream(noise.seed, kAccel);
    auto gyro_rng = stream(noise.seed, kGyro);
    auto mag_rng = stream(noise.seed, kMag);
    auto baro_rng = stream(noise.seed, kBaro);
    auto wifi_rng = stream(noise.seed, kWifi);
    std::normal_distribution<double> gauss(0.0, 1.0);

    for (long i = 0; i <= n_end; ++i) {
        const double t = sample_time(i);
        const double u = static_cast<double>(i);
        const Phase& p = timeline.at(u);
        const double mag = (p.kind == Phase::Walk || p.kind == Phase::Arm) ? walk_accel(p, i) : kGravity;
        const double ax = noise.accel_std * gauss(accel_rng);
        const double ay = noise.accel_std * gauss(accel_rng);
        const double az = mag + noise.accel_std * gauss(accel_rng);
        trace.accel.push_back({t, ax, ay, az});

        const double rate = p.kind == Phase::Pivot ? p.turn * kRate / static_cast<double>(p.length) : 0.0;
        const double gx = noise.gyro_std * gauss(gyro_rng);
        const double gy = noise.gyro_std * gauss(gyro_rng);
        const double gz = rate + noise.gyro_bias + noise.gyro_std * gauss(gyro_rng);
        trace.gyro.push_back({t, gx, gy, gz});

        const TruthState s = truth_in(p, u);
        const int level = static_cast<int>(std::lround(s.floor));
        const double psi = s.heading +
                           deg_to_rad(compass_bias_deg(noise, s.x, s.y, level) +
                                      noise.compass_std_deg * gauss(mag_rng));
        trace.mag.push_back({t, kFieldH * std::cos(psi), -kFieldH * std::sin(psi), -kFieldV});
    }

    const long baro_step = static_cast<long>(kRate / kBaroRate);
    for (long i = 0; i <= n_end; i += baro_step) {
        const TruthState s = timeline.truth(static_cast<double>(i));
        const double pressure =
            env.base_pressure - s.floor * env.pressure_per_floor + noise.baro_std * gauss(baro_rng);
        trace.baro.push_back({sample_time(i), pressure});
    }

    std::vector<double> shadow(env.aps.size(), 0.0);
    for (long k = 1;; ++k) {
        const double t = static_cast<double>(k) * script.scan_interval;
        if (t * kRate > static_cast<double>(n_end)) break;
        const TruthState s = timeline.truth(t * kRate);
        for (auto& v : shadow) v = noise.rss_shadowing * gauss(wifi_rng);
        WifiScan scan;
        scan.t = t;
        for (const auto& [mac, rss] : model_fingerprint(env, s.x, s.y, s.floor, shadow))
            scan.readings.push_back({mac, rss});
        trace.wifi.push_back(std::move(scan));
    }

    int prev_level = first.floor;
    for (long m : truth_marks) {
        const TruthState s = timeline.truth(static_cast<double>(m));
        prev_level = snap_floor(s.floor, prev_level);
        trace.truth.push_back({sample_time(m), s.x, s.y, prev_level});
    }
    return out;
}

std::vector<TestQuery> generate_test_queries(const Environment& env,
                                             const std::vector<std::pair<PlanarPoint, int>>& positions,
                                             const NoiseModel& noise) {
    auto rng = stream(noise.seed, kQueries);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<TestQuery> out;
    std::vector<double> shadow(env.aps.size(), 0.0);
    for (const auto& [pt, floor] : positions) {
        for (auto& v : shadow) v = noise.rss_shadowing * gauss(rng);
        TestQuery q;
        q.x = pt.x;
        q.y = pt.y;
        q.floor = floor;
        q.fingerprint = model_fingerprint(env, pt.x, pt.y, floor, shadow);
        out.push_back(std::move(q));
    }
    return out;
}

std::vector<std::pair<PlanarPoint, int>> sample_corridor_positions(const Environment& env, double spacing) {
    if (!(spacing > 0)) throw ContractViolation("sampling spacing must be positive");
    std::vector<std::pair<PlanarPoint, int>> out;
    std::set<std::tuple<long long, long long, int>> seen;
    auto add = [&](double x, double y, int floor) {
        const auto key = std::make_tuple(std::llround(x * 1e6), std::llround(y * 1e6), floor);
        if (seen.insert(key).second) out.push_back({{x, y}, floor});
    };
    for (const auto& c : env.corridors) {
        double carry = 0;  // distance already covered past the last sample
        if (!c.points.empty()) add(c.points.front().x, c.points.front().y, c.floor);
        for (std::size_t i = 1; i < c.points.size(); ++i) {
            const auto& a = c.points[i - 1];
            const auto& b = c.points[i];
            const double len = std::hypot(b.x - a.x, b.y - a.y);
            double s = spacing - carry;
            while (s <= len + 1e-9) {
                const double w = len > 0 ? std::min(s / len, 1.0) : 0.0;
                add(a.x + (b.x - a.x) * w, a.y + (b.y - a.y) * w, c.floor);
                s += spacing;
            }
            carry = len - (s - spacing);
        }
    }
    return out;
}

std::vector<std::pair<PlanarPoint, int>> query_positions(const Scenario& scenario) {
    auto out = scenario.queries.positions;
    if (scenario.queries.spacing > 0) {
        auto sampled = sample_corridor_positions(scenario.env, scenario.queries.spacing);
        out.insert(out.end(), sampled.begin(), sampled.end());
    }
    return out;
}

// --- scenario files ------------------------------------------------------------

namespace {

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!obj.is_object()) throw SchemaError(where + " must be a JSON object");
    for (const auto& [key, _] : obj.items())
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
            throw SchemaError("unknown field \"" + key + "\" in " + where);
}

const json& need(const json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) throw SchemaError("missing field \"" + std::string(key) + "\" in " + where);
    return *it;
}

std::vector<Corridor> corridors_from_graph(const LandmarkGraph& g) {
    std::vector<Corridor> out;
    std::set<std::pair<LandmarkId, LandmarkId>> done;
    for (const auto& e : g.edges()) {
        const Landmark& a = g.at(e.from);
        const Landmark& b = g.at(e.to);
        if (a.floor != b.floor) continue;
        if (done.contains({e.to, e.from}) || done.contains({e.from, e.to})) continue;
        done.emplace(e.from, e.to);
        out.push_back({a.floor, {{a.x, a.y}, {b.x, b.y}}});
    }
    return out;
}

double distance_to_polyline(const Corridor& c, double x, double y) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < c.points.size(); ++i) {
        const auto& a = c.points[i];
        if (i + 1 == c.points.size()) {
            best = std::min(best, std::hypot(x - a.x, y - a.y));
            break;
        }
        const auto& b = c.points[i + 1];
        const double dx = b.x - a.x, dy = b.y - a.y;
        const double len2 = dx * dx + dy * dy;
        const double w = len2 > 0 ? std::clamp(((x - a.x) * dx + (y - a.y) * dy) / len2, 0.0, 1.0) : 0.0;
        best = std::min(best, std::hypot(x - a.x - w * dx, y - a.y - w * dy));
    }
    return best;
}

Environment parse_environment(const json& j) {
    reject_unknown(j, {"graph", "corridors", "aps", "floor_height", "floor_attenuation_db",
                       "base_pressure_hpa", "pressure_per_floor_hpa"},
                   "environment");
    Environment env;
    env.graph = parse_landmark_graph(need(j, "graph", "environment").dump());
    env.floor_height = j.value("floor_height", env.floor_height);
    env.floor_attenuation = j.value("floor_attenuation_db", env.floor_attenuation);
    env.base_pressure = j.value("base_pressure_hpa", env.base_pressure);
    env.pressure_per_floor = j.value("pressure_per_floor_hpa", env.pressure_per_floor);
    if (j.contains("corridors")) {
        for (const auto& c : j["corridors"]) {
            reject_unknown(c, {"floor", "points"}, "corridor");
            Corridor cor;
            cor.floor = need(c, "floor", "corridor").get<int>();
            for (const auto& p : need(c, "points", "corridor"))
                cor.points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
            if (cor.points.size() < 2) throw ValidationError("corridor needs at least two points");
            env.corridors.push_back(std::move(cor));
        }
        for (const auto& n : env.graph.nodes()) {
            bool on = false;
            for (const auto& c : env.corridors)
                if (c.floor == n.floor && distance_to_polyline(c, n.x, n.y) < 1e-6) on = true;
            if (!on) throw GeometryError("landmark " + n.id + " does not lie on a corridor");
        }
    } else {
        env.corridors = corridors_from_graph(env.graph);
    }
    std::set<std::string> macs;
    for (const auto& a : need(j, "aps", "environment")) {
        reject_unknown(a, {"mac", "x", "y", "floor", "tx_power_dbm", "path_loss_exponent"}, "access point");
        AccessPoint ap;
        ap.mac = need(a, "mac", "access point").get<std::string>();
        if (!is_valid_mac(ap.mac)) throw ValidationError("invalid access point MAC " + ap.mac);
        if (!macs.insert(ap.mac).second) throw ValidationError("duplicate access point MAC " + ap.mac);
        ap.x = need(a, "x", "access point").get<double>();
        ap.y = need(a, "y", "access point").get<double>();
        ap.floor = need(a, "floor", "access point").get<int>();
        ap.tx_power = a.value("tx_power_dbm", ap.tx_power);
        ap.path_loss_exponent = a.value("path_loss_exponent", ap.path_loss_exponent);
        if (!std::isfinite(ap.x) || !std::isfinite(ap.y)) throw ValidationError("access point coordinates must be finite");
        env.aps.push_back(std::move(ap));
    }
    return env;
}

WalkScript parse_script(const json& j) {
    reject_unknown(j, {"waypoints", "speed", "step_length", "stops", "false_walking", "styles",
                       "period_jitter", "scan_interval", "initial_still", "final_still", "turn_duration"},
                   "script");
    WalkScript s;
    s.waypoints = need(j, "waypoints", "script").get<std::vector<std::string>>();
    s.speed = j.value("speed", s.speed);
    s.step_length = j.value("step_length", s.step_length);
    s.period_jitter = j.value("period_jitter", s.period_jitter);
    s.scan_interval = j.value("scan_interval", s.scan_interval);
    s.initial_still = j.value("initial_still", s.initial_still);
    s.final_still = j.value("final_still", s.final_still);
    s.turn_duration = j.value("turn_duration", s.turn_duration);
    if (j.contains("stops"))
        for (const auto& st : j["stops"]) {
            reject_unknown(st, {"at", "duration"}, "stop");
            s.stops.push_back({need(st, "at", "stop").get<std::string>(), need(st, "duration", "stop").get<double>()});
        }
    if (j.contains("false_walking"))
        for (const auto& f : j["false_walking"]) {
            reject_unknown(f, {"t", "duration"}, "false_walking");
            s.false_walking.push_back(
                {need(f, "t", "false_walking").get<double>(), need(f, "duration", "false_walking").get<double>()});
        }
    if (j.contains("styles"))
        for (const auto& st : j["styles"]) {
            reject_unknown(st, {"legs", "period_range", "period_jitter", "length_jitter"}, "style");
            LegStyle ls;
            const auto legs = need(st, "legs", "style").get<std::vector<int>>();
            if (legs.size() != 2) throw SchemaError("style legs must be [first, last]");
            ls.first_leg = legs[0];
            ls.last_leg = legs[1];
            if (st.contains("period_range")) {
                const auto r = st["period_range"].get<std::vector<double>>();
                if (r.size() != 2) throw SchemaError("period_range must be [lo, hi]");
                ls.period_range = std::make_pair(r[0], r[1]);
            }
            ls.period_jitter = st.value("period_jitter", 0.0);
            ls.length_jitter = st.value("length_jitter", 0.0);
            s.styles.push_back(ls);
        }
    return s;
}

NoiseModel parse_noise(const json& j) {
    reject_unknown(j, {"accel_std", "gyro_bias", "gyro_std", "compass_std_deg", "compass_zones", "baro_std",
                       "rss_shadowing_db", "seed"},
                   "noise");
    NoiseModel n;
    n.accel_std = j.value("accel_std", 0.0);
    n.gyro_bias = j.value("gyro_bias", 0.0);
    n.gyro_std = j.value("gyro_std", 0.0);
    n.compass_std_deg = j.value("compass_std_deg", 0.0);
    n.baro_std = j.value("baro_std", 0.0);
    n.rss_shadowing = j.value("rss_shadowing_db", 0.0);
    n.seed = j.value("seed", std::uint64_t{1});
    if (j.contains("compass_zones"))
        for (const auto& z : j["compass_zones"]) {
            reject_unknown(z, {"floor", "x", "y", "offset_deg"}, "compass zone");
            BiasZone bz;
            if (z.contains("floor")) bz.floor = z["floor"].get<int>();
            const auto xs = need(z, "x", "compass zone").get<std::vector<double>>();
            const auto ys = need(z, "y", "compass zone").get<std::vector<double>>();
            if (xs.size() != 2 || ys.size() != 2) throw SchemaError("compass zone x/y must be [min, max]");
            bz.x_min = xs[0];
            bz.x_max = xs[1];
            bz.y_min = ys[0];
            bz.y_max = ys[1];
            bz.offset_deg = need(z, "offset_deg", "compass zone").get<double>();
            n.compass_zones.push_back(bz);
        }
    return n;
}

QuerySpec parse_queries_spec(const json& j) {
    reject_unknown(j, {"spacing", "positions"}, "queries");
    QuerySpec q;
    q.spacing = j.value("spacing", 0.0);
    if (j.contains("positions"))
        for (const auto& p : j["positions"]) {
            reject_unknown(p, {"x", "y", "floor"}, "query position");
            q.positions.push_back({{need(p, "x", "query position").get<double>(),
                                    need(p, "y", "query position").get<double>()},
                                   need(p, "floor", "query position").get<int>()});
        }
    return q;
}

}  // namespace

Scenario parse_scenario(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("scenario: ") + e.what());
    }
    try {
        reject_unknown(doc, {"environment", "script", "noise", "queries", "description"}, "scenario");
        Scenario s;
        s.env = parse_environment(need(doc, "environment", "scenario"));
        s.script = parse_script(need(doc, "script", "scenario"));
        if (doc.contains("noise")) s.noise = parse_noise(doc["noise"]);
        if (doc.contains("queries")) s.queries = parse_queries_spec(doc["queries"]);
        validate_script(s.env, s.script);
        return s;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("scenario: ") + e.what());
    }
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open scenario " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str());
}

void write_pose_json(const Pose& pose, std::ostream& out) {
    out << json{{"t", pose.t}, {"x", pose.x}, {"y", pose.y}, {"floor", pose.level}}.dump(2) << '\n';
}

Pose parse_pose_json(const std::string& json_text) {
    try {
        const json j = json::parse(json_text);
        reject_unknown(j, {"t", "x", "y", "floor"}, "initial pose");
        Pose p;
        p.t = j.value("t", 0.0);
        p.x = need(j, "x", "initial pose").get<double>();
        p.y = need(j, "y", "initial pose").get<double>();
        p.level = need(j, "floor", "initial pose").get<int>();
        p.floor = p.level;
        p.kind = PoseKind::Start;
        return p;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("initial pose: ") + e.what());
    }
}

}  // namespace fpmap
