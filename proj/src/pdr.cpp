#include "fpmap/pdr.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "fpmap/error.hpp"

namespace fpmap {

using nlohmann::json;

int snap_floor(double floor, int previous) {
    const double lower = std::floor(floor);
    const double frac = floor - lower;
    const int lo = static_cast<int>(lower);
    if (frac < 0.5) return lo;
    if (frac > 0.5) return lo + 1;
    return std::abs(previous - lo) <= std::abs(previous - (lo + 1)) ? lo : lo + 1;
}

std::string heading_source_name(HeadingSource s) {
    switch (s) {
        case HeadingSource::Compass: return "pdr-compass";
        case HeadingSource::Gyro: return "pdr-gyro";
        case HeadingSource::LandmarkGraphAssisted: return "landmark";
    }
    return "?";
}

HeadingSource parse_heading_source(const std::string& name) {
    if (name == "pdr-compass" || name == "compass") return HeadingSource::Compass;
    if (name == "pdr-gyro" || name == "gyro") return HeadingSource::Gyro;
    if (name == "landmark") return HeadingSource::LandmarkGraphAssisted;
    throw ParseError("unknown tracking mode \"" + name + "\" (expected pdr-compass, pdr-gyro or landmark)");
}

void PdrConfig::validate() const {
    if (!(step_length > 0)) throw ValidationError("step_length must be positive");
    if (!(pressure_per_floor > 0)) throw ValidationError("pressure_per_floor must be positive");
    if (!(heading_threshold > 0 && heading_threshold < std::numbers::pi))
        throw ValidationError("heading_threshold must lie in (0, pi)");
    if (!(confidence_threshold >= 0)) throw ValidationError("confidence_threshold must be non-negative");
    if (!(distance_floor > 0)) throw ValidationError("distance_floor must be positive");
    if (max_hops < 1 || min_steps_for_length < 1) throw ValidationError("hop/step limits must be >= 1");
    if (!(compass_window > 0)) throw ValidationError("compass_window must be positive");
}

Pose pdr_step(const Pose& prev, double step_length, double heading) {
    Pose next = prev;
    next.x = prev.x + step_length * std::cos(heading);
    next.y = prev.y + step_length * std::sin(heading);
    return next;
}

double floor_update(double prev_floor, double p_now, double p_prev, double pressure_per_floor) {
    if (!(pressure_per_floor > 0)) throw ContractViolation("pressure_per_floor must be positive");
    return prev_floor - (p_now - p_prev) / pressure_per_floor;
}

StepLengthUpdate update_step_length(const Landmark& from, const Landmark& to, int steps,
                                    double previous_length) {
    if (steps <= 0) return {previous_length, true};
    return {std::hypot(to.x - from.x, to.y - from.y) / steps, false};
}

Rule detected_rule(const LandmarkEvent& event) {
    Rule r{event.kind, 0};
    if (event.kind == RuleKind::Gyroscope) r.turn_sign = sgn(event.auxiliary);
    return r;
}

double landmark_confidence(const Landmark& candidate, const Rule& detected, double est_heading,
                           double ref_heading, double traveled, double ref_distance,
                           const PdrConfig& cfg) {
    if (!(ref_distance > 0)) throw ContractViolation("reference distance must be positive");
    if (!(traveled >= 0)) throw ContractViolation("traveled distance must be non-negative");

    const bool rule_match = std::any_of(candidate.rules.begin(), candidate.rules.end(), [&](const Rule& r) {
        if (r.kind != detected.kind) return false;
        return r.turn_sign == 0 || detected.turn_sign == 0 || r.turn_sign == detected.turn_sign;
    });
    if (!rule_match) return 0.0;
    if (!(angle_distance(ref_heading, est_heading) < cfg.heading_threshold)) return 0.0;
    return 1.0 / std::max(std::abs(ref_distance - traveled), cfg.distance_floor);
}

std::vector<LandmarkCandidate> match_candidates(const LandmarkGraph& graph,
                                                const MatchContext& ctx, const PdrConfig& cfg) {
    std::vector<LandmarkCandidate> out;
    const auto& nodes = graph.nodes();

    if (!ctx.anchor) {
        for (const auto& n : nodes) {
            if (n.floor != ctx.level) continue;
            const double dx = n.x - ctx.anchor_x;
            const double dy = n.y - ctx.anchor_y;
            const double d = std::hypot(dx, dy);
            if (d < 1e-9) continue;
            out.push_back({&n, wrap_two_pi(std::atan2(dy, dx)), d, 0});
        }
        return out;
    }

    const Landmark& anchor = graph.at(*ctx.anchor);
    struct Reach {
        double distance = std::numeric_limits<double>::infinity();
        int hops = 0;
    };
    std::map<LandmarkId, Reach> best;
    best[anchor.id] = {0.0, 0};
    for (int h = 1; h <= cfg.max_hops; ++h) {
        const auto frontier = best;
        for (const auto& [id, reach] : frontier) {
            if (reach.hops != h - 1) continue;
            for (const auto* e : graph.outgoing(id)) {
                const double d = reach.distance + e->distance;
                auto it = best.find(e->to);
                if (it == best.end() || d < it->second.distance) best[e->to] = {d, h};
            }
        }
    }

    for (const auto& n : nodes) {
        if (n.id == anchor.id) continue;
        auto it = best.find(n.id);
        if (it == best.end()) continue;
        const Reach& r = it->second;
        // Looking past a missed landmark never leaves the current floor.
        if (r.hops > 1 && n.floor != ctx.level) continue;
        double heading = 0;
        if (r.hops == 1) {
            heading = graph.edge(anchor.id, n.id)->heading;
        } else {
            const double dx = n.x - anchor.x;
            const double dy = n.y - anchor.y;
            if (std::hypot(dx, dy) < 1e-9) continue;
            heading = wrap_two_pi(std::atan2(dy, dx));
        }
        out.push_back({&n, heading, r.distance, r.hops});
    }
    return out;
}

std::optional<LandmarkMatch> match_landmark(const LandmarkEvent& event, const LandmarkGraph& graph,
                                            const MatchContext& ctx, const PdrConfig& cfg) {
    // No steps since the anchor means no heading evidence and nowhere new to be.
    if (!ctx.mean_heading) return std::nullopt;
    const Rule rule = detected_rule(event);
    std::optional<LandmarkMatch> best;
    for (const auto& c : match_candidates(graph, ctx, cfg)) {
        const double conf = landmark_confidence(*c.landmark, rule, *ctx.mean_heading, c.ref_heading,
                                                ctx.traveled, c.ref_distance, cfg);
        if (!(conf > cfg.confidence_threshold)) continue;
        if (best) {
            if (conf < best->confidence) continue;
            if (conf == best->confidence) {
                const double gap = std::abs(c.ref_distance - ctx.traveled);
                const double best_gap = std::abs(best->candidate.ref_distance - ctx.traveled);
                if (gap > best_gap) continue;
                if (gap == best_gap && c.landmark->id >= best->candidate.landmark->id) continue;
            }
        }
        best = LandmarkMatch{c, conf};
    }
    return best;
}

// --- run_pdr ------------------------------------------------------------------

namespace {

class PressureLookup {
public:
    PressureLookup(std::span<const BaroSample> baro, double half_width)
        : baro_(baro), half_(half_width) {
        prefix_.resize(baro.size() + 1, 0.0);
        for (std::size_t i = 0; i < baro.size(); ++i) prefix_[i + 1] = prefix_[i] + baro[i].pressure;
    }

    bool available() const { return !baro_.empty(); }

    /// Mean pressure over [t - half, t + half], nearest sample when the window is empty.
    double at(double t) const {
        auto lo = std::lower_bound(baro_.begin(), baro_.end(), t - half_,
                                   [](const BaroSample& s, double v) { return s.t < v; });
        auto hi = std::upper_bound(baro_.begin(), baro_.end(), t + half_,
                                   [](double v, const BaroSample& s) { return v < s.t; });
        if (hi > lo) {
            const auto a = static_cast<std::size_t>(lo - baro_.begin());
            const auto b = static_cast<std::size_t>(hi - baro_.begin());
            return (prefix_[b] - prefix_[a]) / static_cast<double>(b - a);
        }
        if (lo == baro_.end()) return baro_.back().pressure;
        if (lo == baro_.begin()) return lo->pressure;
        const auto prev = std::prev(lo);
        return (t - prev->t) <= (lo->t - t) ? prev->pressure : lo->pressure;
    }

private:
    std::span<const BaroSample> baro_;
    double half_;
    std::vector<double> prefix_;
};

class CompassLookup {
public:
    explicit CompassLookup(std::span<const MagSample> mag) {
        times_.reserve(mag.size());
        azimuth_.reserve(mag.size());
        for (const auto& m : mag) {
            times_.push_back(m.t);
            azimuth_.push_back(compass_azimuth(m));
        }
    }

    /// Circular mean of azimuths in (from, to]; the latest sample at or before
    /// `to` (or the first sample) when the interval holds none.
    std::optional<double> heading(double from, double to) const {
        if (times_.empty()) return std::nullopt;
        auto lo = std::upper_bound(times_.begin(), times_.end(), from);
        auto hi = std::upper_bound(times_.begin(), times_.end(), to);
        if (hi > lo) {
            CircularMean m;
            for (auto it = lo; it != hi; ++it)
                m.add(azimuth_[static_cast<std::size_t>(it - times_.begin())]);
            return m.mean();
        }
        if (hi == times_.begin()) return azimuth_.front();
        return azimuth_[static_cast<std::size_t>(hi - times_.begin()) - 1];
    }

private:
    std::vector<double> times_;
    std::vector<double> azimuth_;
};

/// Running integral of the vertical angular rate.
class GyroIntegral {
public:
    explicit GyroIntegral(std::span<const GyroSample> gyro) : gyro_(gyro) {
        cumulative_.resize(gyro.size(), 0.0);
        for (std::size_t i = 1; i < gyro.size(); ++i)
            cumulative_[i] = cumulative_[i - 1] + gyro[i - 1].wz * (gyro[i].t - gyro[i - 1].t);
    }

    double at(double t) const {
        if (gyro_.empty()) return 0;
        auto it = std::upper_bound(gyro_.begin(), gyro_.end(), t,
                                   [](double v, const GyroSample& s) { return v < s.t; });
        if (it == gyro_.begin()) return 0;
        const auto k = static_cast<std::size_t>(it - gyro_.begin()) - 1;
        return cumulative_[k] + gyro_[k].wz * (t - gyro_[k].t);
    }

private:
    std::span<const GyroSample> gyro_;
    std::vector<double> cumulative_;
};

}  // namespace

Trajectory run_pdr(const SensorTrace& trace, const LandmarkGraph& graph, const Pose& initial,
                   const PdrConfig& cfg, const SensorConfig& sensor_cfg,
                   const LandmarkConfig& landmark_cfg) {
    if (trace.accel.empty())
        throw ValidationError("unusable trace: no accelerometer records");
    cfg.validate();
    landmark_cfg.validate();

    const auto steps = detect_steps(trace, sensor_cfg);
    const bool assisted = cfg.heading_source == HeadingSource::LandmarkGraphAssisted;
    std::vector<LandmarkEvent> events;
    if (assisted) {
        const auto motion = classify_motion(trace, sensor_cfg);
        events = detect_landmarks(trace, motion, landmark_cfg);
    }

    const PressureLookup pressure(trace.baro, 0.5 * landmark_cfg.baro_window);
    const CompassLookup compass(trace.mag);
    const GyroIntegral gyro(trace.gyro);

    Trajectory traj;
    Pose pose = initial;
    pose.kind = PoseKind::Start;
    pose.level = snap_floor(initial.floor, static_cast<int>(std::lround(initial.floor)));
    pose.periodicity.reset();
    pose.segment = 0;
    pose.landmark.reset();

    // Calibration state since the last anchor.
    std::optional<LandmarkId> anchor;
    for (const auto& n : graph.nodes()) {
        if (n.floor == pose.level && std::hypot(n.x - pose.x, n.y - pose.y) < 1e-6) {
            anchor = n.id;
            pose.landmark = n.id;
            break;
        }
    }
    double anchor_x = pose.x, anchor_y = pose.y;
    double step_length = cfg.step_length;
    double traveled = 0;
    int steps_since = 0;
    CircularMean headings;
    const Edge* active_edge = nullptr;
    double edge_turn_ref = 0;
    bool edge_lost = false;
    // Baro events are only resolved to a window, too coarse to rescale steps.
    bool anchor_timed = true;
    double last_heading = 0;
    std::optional<double> gyro_origin_heading;
    double gyro_origin = 0;
    double prev_step_t = pose.t;

    traj.poses.push_back(pose);
    traj.segments.push_back({{{pose.t, pose.x, pose.y, pose.level}}, {}, anchor, std::nullopt});

    auto select_heading = [&](double t) {
        const auto measured = compass.heading(std::max(prev_step_t, t - cfg.compass_window), t);
        const double compass_heading = measured.value_or(last_heading);
        switch (cfg.heading_source) {
            case HeadingSource::Compass:
                return compass_heading;
            case HeadingSource::Gyro:
                if (!gyro_origin_heading) {
                    gyro_origin_heading = compass_heading;
                    gyro_origin = gyro.at(t);
                }
                return wrap_two_pi(*gyro_origin_heading + gyro.at(t) - gyro_origin);
            case HeadingSource::LandmarkGraphAssisted:
                break;
        }
        if (active_edge) {
            if (std::abs(gyro.at(t) - edge_turn_ref) < cfg.heading_threshold) return active_edge->heading;
            active_edge = nullptr;
            edge_lost = true;
        }
        if (!edge_lost && anchor) {
            const Edge* pick = nullptr;
            double pick_gap = cfg.heading_threshold;
            for (const auto* e : graph.outgoing(*anchor)) {
                const double gap = angle_distance(e->heading, compass_heading);
                if (gap < pick_gap) {
                    pick_gap = gap;
                    pick = e;
                }
            }
            if (pick) {
                active_edge = pick;
                edge_turn_ref = gyro.at(t);
                return pick->heading;
            }
        }
        return compass_heading;
    };

    auto apply_step = [&](const StepEvent& s) {
        const double heading = select_heading(s.t);
        last_heading = heading;
        Pose next = pdr_step(pose, step_length, heading);
        next.t = s.t;
        if (pressure.available())
            next.floor = floor_update(pose.floor, pressure.at(s.t), pressure.at(pose.t),
                                      cfg.pressure_per_floor);
        next.level = snap_floor(next.floor, pose.level);
        next.kind = PoseKind::Step;
        next.periodicity = s.periodicity;
        next.landmark.reset();
        next.segment = static_cast<int>(traj.segments.size()) - 1;

        auto& seg = traj.segments.back();
        seg.points.push_back({next.t, next.x, next.y, next.level});
        if (s.periodicity) seg.periodicities.push_back(*s.periodicity);
        traj.poses.push_back(next);
        pose = next;
        prev_step_t = s.t;
        traveled += step_length;
        ++steps_since;
        headings.add(heading);
    };

    auto handle_event = [&](const LandmarkEvent& e) {
        MatchContext ctx;
        ctx.anchor = anchor;
        ctx.anchor_x = anchor_x;
        ctx.anchor_y = anchor_y;
        ctx.level = pose.level;
        ctx.traveled = traveled;
        if (!headings.empty()) ctx.mean_heading = headings.mean();
        const auto match = match_landmark(e, graph, ctx, cfg);
        if (!match) return;
        const Landmark& lm = *match->candidate.landmark;

        const bool timed = e.kind == RuleKind::Accelerometer || e.kind == RuleKind::Gyroscope;
        if (anchor && anchor_timed && timed && match->candidate.hops == 1) {
            const Landmark& from = graph.at(*anchor);
            if (from.floor == lm.floor &&
                (steps_since == 0 || steps_since >= cfg.min_steps_for_length)) {
                const auto upd = update_step_length(from, lm, steps_since, step_length);
                if (upd.anomaly) ++traj.missed_step_anomalies;
                step_length = upd.length;
            }
        }

        traj.segments.back().end_landmark = lm.id;
        Pose snap;
        snap.t = e.t;
        snap.x = lm.x;
        snap.y = lm.y;
        snap.floor = lm.floor;
        snap.level = lm.floor;
        snap.kind = PoseKind::Snap;
        snap.landmark = lm.id;
        snap.segment = static_cast<int>(traj.segments.size());
        traj.poses.push_back(snap);
        traj.segments.push_back({{{snap.t, snap.x, snap.y, snap.level}}, {}, lm.id, std::nullopt});
        traj.landmark_visits.push_back({e.t, lm.id, match->confidence});
        pose = snap;

        anchor = lm.id;
        anchor_timed = timed;
        anchor_x = lm.x;
        anchor_y = lm.y;
        traveled = 0;
        steps_since = 0;
        headings = {};
        active_edge = nullptr;
        edge_lost = false;
    };

    std::size_t i = 0, j = 0;
    while (i < steps.size() || j < events.size()) {
        const bool take_event =
            j < events.size() && (i >= steps.size() || events[j].t <= steps[i].t);
        if (take_event) {
            if (events[j].t >= pose.t) handle_event(events[j]);
            ++j;
        } else {
            if (steps[i].t > pose.t) apply_step(steps[i]);
            ++i;
        }
    }
    return traj;
}

std::vector<double> position_errors(const Trajectory& traj, std::span<const TruthSample> truth) {
    std::vector<double> errors;
    if (truth.empty()) return errors;
    errors.reserve(traj.poses.size());
    for (const auto& p : traj.poses) {
        auto it = std::lower_bound(truth.begin(), truth.end(), p.t,
                                   [](const TruthSample& s, double v) { return s.t < v; });
        double tx, ty;
        if (it == truth.begin()) {
            tx = it->x;
            ty = it->y;
        } else if (it == truth.end()) {
            tx = truth.back().x;
            ty = truth.back().y;
        } else {
            const auto& b = *it;
            const auto& a = *std::prev(it);
            const double span = b.t - a.t;
            const double w = span > 0 ? (p.t - a.t) / span : 1.0;
            tx = a.x + (b.x - a.x) * w;
            ty = a.y + (b.y - a.y) * w;
        }
        errors.push_back(std::hypot(p.x - tx, p.y - ty));
    }
    return errors;
}

// --- trajectory JSONL ----------------------------------------------------------

namespace {

const char* kind_label(PoseKind k) {
    switch (k) {
        case PoseKind::Start: return "start";
        case PoseKind::Step: return "step";
        case PoseKind::Snap: return "snap";
    }
    return "?";
}

PoseKind parse_kind(const std::string& s, std::size_t line) {
    if (s == "start") return PoseKind::Start;
    if (s == "step") return PoseKind::Step;
    if (s == "snap") return PoseKind::Snap;
    throw ParseError("unknown pose kind \"" + s + "\"", line);
}

}  // namespace

void write_trajectory(const Trajectory& traj, std::ostream& out) {
    std::map<std::pair<double, LandmarkId>, double> confidence;
    for (const auto& v : traj.landmark_visits) confidence[{v.t, v.id}] = v.confidence;
    for (const auto& p : traj.poses) {
        json j = {{"t", p.t}, {"x", p.x}, {"y", p.y}, {"floor", p.level}, {"segment", p.segment},
                  {"kind", kind_label(p.kind)}};
        if (p.periodicity) j["period"] = *p.periodicity;
        if (p.landmark) {
            j["landmark"] = *p.landmark;
            if (p.kind == PoseKind::Snap) {
                auto it = confidence.find({p.t, *p.landmark});
                if (it != confidence.end()) j["confidence"] = it->second;
            }
        }
        out << j.dump() << '\n';
    }
}

void save_trajectory(const Trajectory& traj, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write trajectory " + path.string());
    write_trajectory(traj, out);
}

Trajectory parse_trajectory(std::istream& in) {
    Trajectory traj;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(text);
        } catch (const json::parse_error& e) {
            throw ParseError(std::string("malformed JSON: ") + e.what(), line);
        }
        try {
            Pose p;
            p.t = j.at("t").get<double>();
            p.x = j.at("x").get<double>();
            p.y = j.at("y").get<double>();
            p.level = j.at("floor").get<int>();
            p.floor = p.level;
            p.segment = j.at("segment").get<int>();
            p.kind = parse_kind(j.value("kind", std::string("step")), line);
            if (j.contains("period")) p.periodicity = j.at("period").get<double>();
            if (j.contains("landmark")) p.landmark = j.at("landmark").get<std::string>();

            const int expected = static_cast<int>(traj.segments.size());
            if (p.segment == expected) {
                traj.segments.push_back({});
                traj.segments.back().start_landmark = p.landmark;
                if (expected > 0 && p.kind == PoseKind::Snap)
                    traj.segments[static_cast<std::size_t>(expected) - 1].end_landmark = p.landmark;
            } else if (p.segment != expected - 1) {
                throw ParseError("segment ids must be contiguous and non-decreasing", line);
            }
            if (!traj.poses.empty() && p.t < traj.poses.back().t)
                throw ValidationError("trajectory timestamp regression at line " + std::to_string(line));
            auto& seg = traj.segments.back();
            seg.points.push_back({p.t, p.x, p.y, p.level});
            if (p.periodicity) seg.periodicities.push_back(*p.periodicity);
            if (p.kind == PoseKind::Snap && p.landmark)
                traj.landmark_visits.push_back({p.t, *p.landmark, j.value("confidence", 0.0)});
            traj.poses.push_back(std::move(p));
        } catch (const json::exception& e) {
            throw ParseError(std::string("bad trajectory record: ") + e.what(), line);
        }
    }
    return traj;
}

Trajectory load_trajectory(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open trajectory " + path.string());
    return parse_trajectory(in);
}

}  // namespace fpmap
