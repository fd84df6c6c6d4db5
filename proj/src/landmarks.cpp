#include "fpmap/landmarks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fpmap/angles.hpp"
#include "fpmap/error.hpp"

namespace fpmap {

using nlohmann::json;

Rule parse_rule(const std::string& name) {
    if (name == "acc") return {RuleKind::Accelerometer, 0};
    if (name == "gyro") return {RuleKind::Gyroscope, 0};
    if (name == "gyro_left") return {RuleKind::Gyroscope, +1};
    if (name == "gyro_right") return {RuleKind::Gyroscope, -1};
    if (name == "baro_in") return {RuleKind::BaroEntrance, 0};
    if (name == "baro_out") return {RuleKind::BaroExit, 0};
    throw ParseError("unknown landmark rule \"" + name + "\"");
}

std::string rule_name(const Rule& rule) {
    switch (rule.kind) {
        case RuleKind::Accelerometer: return "acc";
        case RuleKind::Gyroscope:
            return rule.turn_sign > 0 ? "gyro_left" : rule.turn_sign < 0 ? "gyro_right" : "gyro";
        case RuleKind::BaroEntrance: return "baro_in";
        case RuleKind::BaroExit: return "baro_out";
    }
    return "?";
}

std::string kind_name(RuleKind kind) { return rule_name({kind, 0}); }

// --- graph ------------------------------------------------------------------

LandmarkGraph::LandmarkGraph(std::vector<Landmark> nodes, std::vector<Edge> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)) {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const auto& n = nodes_[i];
        if (n.id.empty()) throw ValidationError("landmark with empty id");
        if (n.rules.empty()) throw ValidationError("landmark " + n.id + " has no rules");
        if (!std::isfinite(n.x) || !std::isfinite(n.y))
            throw ValidationError("landmark " + n.id + " has non-finite coordinates");
        if (!index_.emplace(n.id, i).second)
            throw ValidationError("duplicate landmark id " + n.id);
    }
    out_.resize(nodes_.size());
    std::set<std::pair<LandmarkId, LandmarkId>> seen;
    for (std::size_t e = 0; e < edges_.size(); ++e) {
        auto& edge = edges_[e];
        const auto from = index_.find(edge.from);
        if (from == index_.end() || !index_.contains(edge.to))
            throw ValidationError("edge " + edge.from + "->" + edge.to +
                                  " references an unknown landmark");
        if (edge.from == edge.to) throw ValidationError("self-loop edge at " + edge.from);
        if (!(edge.distance > 0) || !std::isfinite(edge.distance))
            throw ValidationError("edge " + edge.from + "->" + edge.to +
                                  " must have a positive distance");
        if (!seen.emplace(edge.from, edge.to).second)
            throw ValidationError("duplicate edge " + edge.from + "->" + edge.to);
        edge.heading = wrap_two_pi(edge.heading);
        out_[from->second].push_back(e);
    }
}

const Landmark* LandmarkGraph::find(const LandmarkId& id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &nodes_[it->second];
}

const Landmark& LandmarkGraph::at(const LandmarkId& id) const {
    if (const auto* n = find(id)) return *n;
    throw ContractViolation("unknown landmark id " + id);
}

std::vector<const Edge*> LandmarkGraph::outgoing(const LandmarkId& id) const {
    std::vector<const Edge*> result;
    auto it = index_.find(id);
    if (it == index_.end()) return result;
    for (auto e : out_[it->second]) result.push_back(&edges_[e]);
    return result;
}

const Edge* LandmarkGraph::edge(const LandmarkId& from, const LandmarkId& to) const {
    for (const auto* e : outgoing(from))
        if (e->to == to) return e;
    return nullptr;
}

namespace {

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                         const std::string& where) {
    for (const auto& [key, _] : obj.items()) {
        if (std::none_of(allowed.begin(), allowed.end(),
                         [&](const char* a) { return key == a; }))
            throw SchemaError("unknown field \"" + key + "\" in " + where);
    }
}

const json& require(const json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) throw SchemaError("missing field \"" + std::string(key) + "\" in " + where);
    return *it;
}

double require_number(const json& obj, const char* key, const std::string& where) {
    const auto& v = require(obj, key, where);
    if (!v.is_number()) throw SchemaError("field \"" + std::string(key) + "\" in " + where + " must be a number");
    return v.get<double>();
}

}  // namespace

namespace {

LandmarkGraph parse_graph_text(const std::string& json_text, const GraphLoadOptions& opts) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("landmark graph: ") + e.what());
    }
    if (!doc.is_object()) throw SchemaError("landmark graph must be a JSON object");
    reject_unknown_keys(doc, {"nodes", "edges", "auto_reverse"}, "landmark graph");

    std::vector<Landmark> nodes;
    for (const auto& n : require(doc, "nodes", "landmark graph")) {
        const std::string where = "landmark node";
        reject_unknown_keys(n, {"id", "x", "y", "floor", "rules"}, where);
        Landmark lm;
        const auto& id = require(n, "id", where);
        if (!id.is_string()) throw SchemaError("landmark id must be a string");
        lm.id = id.get<std::string>();
        lm.x = require_number(n, "x", where);
        lm.y = require_number(n, "y", where);
        const auto& floor = require(n, "floor", where);
        if (!floor.is_number_integer()) throw SchemaError("landmark floor must be an integer");
        lm.floor = floor.get<int>();
        for (const auto& r : require(n, "rules", where)) {
            if (!r.is_string()) throw SchemaError("landmark rules must be strings");
            lm.rules.push_back(parse_rule(r.get<std::string>()));
        }
        nodes.push_back(std::move(lm));
    }

    std::unordered_map<LandmarkId, const Landmark*> by_id;
    for (const auto& n : nodes) by_id.emplace(n.id, &n);

    std::vector<Edge> edges;
    std::set<std::pair<LandmarkId, LandmarkId>> declared;
    const auto edges_it = doc.find("edges");
    if (edges_it != doc.end()) {
        for (const auto& e : *edges_it) {
            const std::string where = "landmark edge";
            reject_unknown_keys(e, {"from", "to", "heading_deg", "distance_m", "override"}, where);
            Edge edge;
            edge.from = require(e, "from", where).get<std::string>();
            edge.to = require(e, "to", where).get<std::string>();
            const auto a = by_id.find(edge.from);
            const auto b = by_id.find(edge.to);
            if (a == by_id.end() || b == by_id.end())
                throw ValidationError("dangling edge endpoint in " + edge.from + "->" + edge.to);
            const double dx = b->second->x - a->second->x;
            const double dy = b->second->y - a->second->y;
            const double geo_dist = std::hypot(dx, dy);
            const double geo_heading = wrap_two_pi(std::atan2(dy, dx));
            edge.geometry_override = e.value("override", false);
            edge.heading = e.contains("heading_deg") ? deg_to_rad(require_number(e, "heading_deg", where))
                                                     : geo_heading;
            edge.distance = e.contains("distance_m") ? require_number(e, "distance_m", where) : geo_dist;
            if (!edge.geometry_override) {
                if (std::abs(edge.distance - geo_dist) > opts.distance_tolerance_m) {
                    std::ostringstream msg;
                    msg << "edge " << edge.from << "->" << edge.to << " declares distance "
                        << edge.distance << " m but endpoints are " << geo_dist << " m apart";
                    throw GeometryError(msg.str());
                }
                if (geo_dist > 0 &&
                    rad_to_deg(angle_distance(edge.heading, geo_heading)) > opts.heading_tolerance_deg) {
                    std::ostringstream msg;
                    msg << "edge " << edge.from << "->" << edge.to << " declares heading "
                        << rad_to_deg(edge.heading) << " deg but endpoints give "
                        << rad_to_deg(geo_heading) << " deg";
                    throw GeometryError(msg.str());
                }
            }
            declared.emplace(edge.from, edge.to);
            edges.push_back(std::move(edge));
        }
    }

    if (doc.value("auto_reverse", false)) {
        const auto forward = edges.size();
        for (std::size_t i = 0; i < forward; ++i) {
            const Edge& e = edges[i];
            if (declared.contains({e.to, e.from})) continue;
            declared.emplace(e.to, e.from);
            edges.push_back(Edge{e.to, e.from, wrap_two_pi(e.heading + std::numbers::pi),
                                 e.distance, e.geometry_override});
        }
    }
    return LandmarkGraph(std::move(nodes), std::move(edges));
}

}  // namespace

LandmarkGraph parse_landmark_graph(const std::string& json_text, const GraphLoadOptions& opts) {
    try {
        return parse_graph_text(json_text, opts);
    } catch (const json::exception& e) {
        throw SchemaError(std::string("landmark graph: ") + e.what());
    }
}

LandmarkGraph load_landmark_graph(const std::filesystem::path& path, const GraphLoadOptions& opts) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open landmark graph " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_landmark_graph(buf.str(), opts);
}

std::string dump_landmark_graph(const LandmarkGraph& graph) {
    json nodes = json::array();
    for (const auto& n : graph.nodes()) {
        json rules = json::array();
        for (const auto& r : n.rules) rules.push_back(rule_name(r));
        nodes.push_back({{"id", n.id}, {"x", n.x}, {"y", n.y}, {"floor", n.floor}, {"rules", rules}});
    }
    json edges = json::array();
    for (const auto& e : graph.edges()) {
        json j = {{"from", e.from},
                  {"to", e.to},
                  {"heading_deg", rad_to_deg(e.heading)},
                  {"distance_m", e.distance}};
        if (e.geometry_override) j["override"] = true;
        edges.push_back(std::move(j));
    }
    return json{{"nodes", nodes}, {"edges", edges}, {"auto_reverse", false}}.dump(2);
}

LandmarkGraph relabel_floor(const LandmarkGraph& graph, int floor, const std::string& id_suffix) {
    std::vector<Landmark> nodes = graph.nodes();
    for (auto& n : nodes) {
        n.floor = floor;
        n.id += id_suffix;
    }
    std::vector<Edge> edges = graph.edges();
    for (auto& e : edges) {
        e.from += id_suffix;
        e.to += id_suffix;
    }
    return LandmarkGraph(std::move(nodes), std::move(edges));
}

// --- detection ----------------------------------------------------------------

void LandmarkConfig::validate() const {
    if (!(gyro_threshold > 0 && gyro_window > 0 && baro_flat > 0 && baro_delta > 0 &&
          baro_window > 0 && walking_min > 0 && still_min > 0 && still_max > 0))
        throw ValidationError("landmark thresholds must be positive");
    if (!(still_min < still_max)) throw ValidationError("still_min must be below still_max");
}

std::vector<LandmarkEvent> detect_acc_landmarks(std::span<const MotionLabel> motion,
                                                const LandmarkConfig& cfg) {
    cfg.validate();
    std::vector<LandmarkEvent> events;
    if (motion.empty()) return events;

    std::vector<double> times;
    times.reserve(motion.size());
    for (const auto& m : motion) times.push_back(m.t);
    const double hop = median_interval(times);

    struct Run {
        MotionState state;
        double first, last;
        double duration(double h) const { return last - first + h; }
    };
    std::vector<Run> runs;
    for (const auto& m : motion) {
        if (runs.empty() || runs.back().state != m.state)
            runs.push_back({m.state, m.t, m.t});
        else
            runs.back().last = m.t;
    }

    for (std::size_t i = 1; i + 1 < runs.size(); ++i) {
        const Run& before = runs[i - 1];
        const Run& still = runs[i];
        const Run& after = runs[i + 1];
        if (still.state != MotionState::Still) continue;
        const double d = still.duration(hop);
        if (before.duration(hop) >= cfg.walking_min && after.duration(hop) >= cfg.walking_min &&
            d >= cfg.still_min && d <= cfg.still_max)
            events.push_back({still.first, RuleKind::Accelerometer, d});
    }
    return events;
}

std::vector<LandmarkEvent> detect_gyro_landmarks(const SensorTrace& trace,
                                                 const LandmarkConfig& cfg) {
    cfg.validate();
    const auto& g = trace.gyro;
    const auto w = static_cast<std::size_t>(cfg.gyro_window);
    std::vector<LandmarkEvent> events;
    if (g.size() < w) return events;

    std::vector<double> times;
    times.reserve(g.size());
    for (const auto& s : g) times.push_back(s.t);
    const double nominal_dt = median_interval(times);
    auto dt = [&](std::size_t k) {
        return k + 1 < g.size() ? g[k + 1].t - g[k].t : nominal_dt;
    };

    double window_sum = 0;
    for (std::size_t k = 0; k < w; ++k) window_sum += std::abs(g[k].wz);

    std::optional<std::size_t> run_first;  // end index of the first above-threshold window
    std::size_t run_last = 0;
    auto close_run = [&] {
        if (!run_first) return;
        double angle = 0;
        for (std::size_t k = *run_first + 1 - w; k <= run_last; ++k) angle += g[k].wz * dt(k);
        events.push_back({g[*run_first].t, RuleKind::Gyroscope, angle});
        run_first.reset();
    };

    for (std::size_t end = w - 1; end < g.size(); ++end) {
        if (end >= w) window_sum += std::abs(g[end].wz) - std::abs(g[end - w].wz);
        const bool above = window_sum / static_cast<double>(w) > cfg.gyro_threshold;
        if (above) {
            if (!run_first) run_first = end;
            run_last = end;
        } else {
            close_run();
        }
    }
    close_run();
    return events;
}

int sgn(double delta) { return delta > 0 ? 1 : delta < 0 ? -1 : 0; }

std::vector<PressureWindow> pressure_windows(std::span<const BaroSample> baro, double width) {
    if (!(width > 0)) throw ContractViolation("pressure window width must be positive");
    std::vector<PressureWindow> windows;
    if (baro.empty()) return windows;
    const double t0 = baro.front().t;
    std::size_t i = 0;
    while (i < baro.size()) {
        const auto index = static_cast<long long>(std::floor((baro[i].t - t0) / width));
        const double start = t0 + static_cast<double>(index) * width;
        const double end = start + width;
        double sum = 0;
        std::size_t count = 0;
        while (i < baro.size() &&
               static_cast<long long>(std::floor((baro[i].t - t0) / width)) == index) {
            sum += baro[i].pressure;
            ++count;
            ++i;
        }
        windows.push_back({start, end, sum / static_cast<double>(count)});
    }
    return windows;
}

std::vector<LandmarkEvent> detect_baro_landmarks(std::span<const PressureWindow> windows,
                                                 const LandmarkConfig& cfg) {
    cfg.validate();
    std::vector<LandmarkEvent> events;
    const auto n = windows.size();
    if (n < 3) return events;
    auto p = [&](std::size_t i) { return windows[i].mean; };

    // Maximal runs [a, b] of window-to-window deltas sharing one nonzero sign;
    // the run length is the dynamically grown K.
    std::size_t j = 1;
    while (j < n) {
        const int s = sgn(p(j) - p(j - 1));
        if (s == 0) {
            ++j;
            continue;
        }
        const std::size_t a = j;
        while (j + 1 < n && sgn(p(j + 1) - p(j)) == s) ++j;
        const std::size_t b = j;
        ++j;

        // Entrance: flat into window a-1, then the run carries the pressure away.
        const std::size_t i_in = a - 1;
        if (i_in >= 1 && std::abs(p(i_in) - p(i_in - 1)) < cfg.baro_flat &&
            std::abs(p(b) - p(i_in)) > cfg.baro_delta)
            events.push_back({windows[i_in].t_end, RuleKind::BaroEntrance, p(b) - p(i_in)});

        // Exit: the run arrives at window b, which is flat with its successor.
        if (b + 1 < n && std::abs(p(b) - p(b + 1)) < cfg.baro_flat &&
            std::abs(p(a - 1) - p(b)) > cfg.baro_delta)
            events.push_back({windows[b].t_start, RuleKind::BaroExit, p(b) - p(a - 1)});
    }
    return events;
}

std::vector<LandmarkEvent> detect_baro_landmarks(const SensorTrace& trace,
                                                 const LandmarkConfig& cfg) {
    const auto windows = pressure_windows(trace.baro, cfg.baro_window);
    return detect_baro_landmarks(std::span<const PressureWindow>(windows), cfg);
}

std::vector<LandmarkEvent> suppress_still_turns(std::vector<LandmarkEvent> events,
                                                std::span<const MotionLabel> motion) {
    std::erase_if(events, [&](const LandmarkEvent& e) {
        return e.kind == RuleKind::Gyroscope && motion_at(motion, e.t) == MotionState::Still;
    });
    return events;
}

std::vector<LandmarkEvent> detect_landmarks(const SensorTrace& trace,
                                            std::span<const MotionLabel> motion,
                                            const LandmarkConfig& cfg) {
    auto events = detect_acc_landmarks(motion, cfg);
    auto gyro = suppress_still_turns(detect_gyro_landmarks(trace, cfg), motion);
    auto baro = detect_baro_landmarks(trace, cfg);
    events.insert(events.end(), gyro.begin(), gyro.end());
    events.insert(events.end(), baro.begin(), baro.end());
    std::stable_sort(events.begin(), events.end(),
                     [](const LandmarkEvent& a, const LandmarkEvent& b) { return a.t < b.t; });
    return events;
}

}  // namespace fpmap
