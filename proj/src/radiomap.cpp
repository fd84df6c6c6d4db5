#include "fpmap/radiomap.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "fpmap/error.hpp"

namespace fpmap {

using nlohmann::json;

void QualityConfig::validate() const {
    if (!(t_min > 0 && t_min < t_max)) throw ValidationError("quality config needs 0 < t_min < t_max");
    if (!(belief_threshold > 0)) throw ValidationError("belief_threshold must be positive");
    if (!(sigma_floor > 0)) throw ValidationError("sigma_floor must be positive");
    if (belief_ceiling && !(*belief_ceiling > 0)) throw ValidationError("belief_ceiling must be positive");
}

int chi(double periodicity, const QualityConfig& cfg) {
    if (!(periodicity > 0)) throw ContractViolation("step periodicity must be positive");
    return periodicity >= cfg.t_min && periodicity <= cfg.t_max ? 1 : 0;
}

std::optional<double> segment_belief(std::span<const double> periodicities, const QualityConfig& cfg) {
    if (periodicities.size() < 2) return std::nullopt;
    double total = 0, valid_total = 0;
    std::vector<double> valid;
    for (double t : periodicities) {
        total += t;
        if (chi(t, cfg)) {
            valid_total += t;
            valid.push_back(t);
        }
    }
    if (valid.empty()) return 0.0;
    double mean = 0;
    for (double t : valid) mean += t;
    mean /= static_cast<double>(valid.size());
    double var = 0;
    for (double t : valid) var += (t - mean) * (t - mean);
    var /= static_cast<double>(valid.size());
    return (valid_total / total) / std::max(std::sqrt(var), cfg.sigma_floor);
}

std::optional<double> segment_belief(const PathSegment& seg, const QualityConfig& cfg) {
    return segment_belief(std::span<const double>(seg.periodicities), cfg);
}

PlanarPoint interpolate_rp(double t, const PathPoint& before, const PathPoint& after) {
    if (t < before.t || t > after.t) throw ContractViolation("scan time outside the bracketing poses");
    const double span = after.t - before.t;
    if (span <= 0) return {before.x, before.y};
    const double w = (t - before.t) / span;
    return {before.x + (after.x - before.x) * w, before.y + (after.y - before.y) * w};
}

namespace {

struct FlatPoint {
    PathPoint p;
    int segment;
};

void write_config(RadioMap& map, const QualityConfig& cfg) {
    map.config = {{"t_min", cfg.t_min},
                  {"t_max", cfg.t_max},
                  {"belief_threshold", cfg.belief_threshold},
                  {"sigma_floor", cfg.sigma_floor}};
    if (cfg.belief_ceiling) map.config["belief_ceiling"] = *cfg.belief_ceiling;
}

}  // namespace

RadioMap build_radio_map(const Trajectory& traj, std::span<const WifiScan> scans,
                         const QualityConfig& cfg, BuildReport* report) {
    cfg.validate();
    RadioMap map;
    write_config(map, cfg);
    BuildReport local;
    BuildReport& rep = report ? *report : local;
    rep = {};

    if (traj.segments.empty()) {
        rep.warnings.push_back("trajectory is empty; radio map left empty");
        return map;
    }
    if (scans.empty()) rep.warnings.push_back("no WiFi scans; radio map left empty");

    std::vector<FlatPoint> points;
    for (std::size_t s = 0; s < traj.segments.size(); ++s) {
        const auto& seg = traj.segments[s];
        rep.segments.push_back({static_cast<int>(s), segment_belief(seg, cfg), 0, 0});
        for (const auto& p : seg.points) points.push_back({p, static_cast<int>(s)});
    }
    for (std::size_t i = 1; i < points.size(); ++i)
        if (points[i].p.t < points[i - 1].p.t)
            throw ValidationError("trajectory poses are not time-ordered");

    std::set<std::tuple<double, double, int, double>> seen;
    double last_scan = -std::numeric_limits<double>::infinity();
    for (const auto& scan : scans) {
        if (scan.t < last_scan) throw ValidationError("scans are not time-ordered");
        last_scan = scan.t;

        auto it = std::lower_bound(points.begin(), points.end(), scan.t,
                                   [](const FlatPoint& f, double t) { return f.p.t < t; });
        if (it == points.end()) {
            ++rep.dropped_outside;
            continue;
        }
        PlanarPoint xy;
        int floor = 0;
        int segment = 0;
        if (it->p.t == scan.t) {
            xy = {it->p.x, it->p.y};
            floor = it->p.level;
            segment = it->segment;
        } else {
            if (it == points.begin()) {
                ++rep.dropped_outside;
                continue;
            }
            const auto& after = *it;
            const auto& before = *std::prev(it);
            if (before.segment != after.segment) {
                ++rep.dropped_outside;
                continue;
            }
            xy = interpolate_rp(scan.t, before.p, after.p);
            floor = (scan.t - before.p.t) <= (after.p.t - scan.t) ? before.p.level : after.p.level;
            segment = before.segment;
        }

        auto& seg_rep = rep.segments[static_cast<std::size_t>(segment)];
        ++seg_rep.scans;
        const auto& belief = seg_rep.belief;
        if (!belief || !(*belief > cfg.belief_threshold)) continue;
        if (cfg.belief_ceiling && !(*belief < *cfg.belief_ceiling)) continue;
        auto fp = scan.fingerprint();
        if (fp.empty()) continue;
        if (!seen.emplace(xy.x, xy.y, floor, scan.t).second) continue;
        ++seg_rep.accepted;
        map.entries.push_back({xy.x, xy.y, floor, std::move(fp), *belief, scan.t, segment});
    }
    return map;
}

RadioMap merge_radio_maps(std::span<const RadioMap> maps) {
    RadioMap out;
    if (!maps.empty()) out.config = maps.front().config;
    for (const auto& m : maps) out.entries.insert(out.entries.end(), m.entries.begin(), m.entries.end());
    std::stable_sort(out.entries.begin(), out.entries.end(),
                     [](const RadioMapEntry& a, const RadioMapEntry& b) { return a.t < b.t; });
    return out;
}

// --- persistence -----------------------------------------------------------------

namespace {

constexpr int kMapVersion = 1;

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
    for (const auto& [key, _] : obj.items())
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
            throw SchemaError("unknown field \"" + key + "\" in " + where);
}

const json& field(const json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) throw SchemaError("missing field \"" + std::string(key) + "\" in " + where);
    return *it;
}

}  // namespace

std::string dump_radio_map(const RadioMap& map) {
    json entries = json::array();
    for (const auto& e : map.entries) {
        json fp = json::object();
        for (const auto& [mac, rss] : e.fingerprint) fp[mac] = rss;
        entries.push_back({{"x", e.x}, {"y", e.y}, {"floor", e.floor}, {"belief", e.belief},
                           {"t", e.t}, {"segment", e.segment}, {"fp", fp}});
    }
    json cfg = json::object();
    for (const auto& [k, v] : map.config) cfg[k] = v;
    json doc = {{"version", kMapVersion}, {"config", cfg}, {"entries", entries}};
    return doc.dump(1) + "\n";
}

RadioMap parse_radio_map(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("radio map: ") + e.what());
    }
    try {
        if (!doc.is_object()) throw SchemaError("radio map must be a JSON object");
        reject_unknown(doc, {"version", "config", "entries"}, "radio map");
        const auto& version = field(doc, "version", "radio map");
        if (!version.is_number_integer() || version.get<int>() != kMapVersion)
            throw SchemaError("unsupported radio map version " + version.dump() + " (expected " +
                              std::to_string(kMapVersion) + ")");
        RadioMap map;
        if (doc.contains("config"))
            for (const auto& [k, v] : doc["config"].items()) map.config[k] = v.get<double>();
        for (const auto& e : field(doc, "entries", "radio map")) {
            reject_unknown(e, {"x", "y", "floor", "belief", "t", "segment", "fp"}, "radio map entry");
            RadioMapEntry entry;
            entry.x = field(e, "x", "radio map entry").get<double>();
            entry.y = field(e, "y", "radio map entry").get<double>();
            entry.floor = field(e, "floor", "radio map entry").get<int>();
            entry.belief = e.value("belief", 0.0);
            entry.t = e.value("t", 0.0);
            entry.segment = e.value("segment", 0);
            for (const auto& [mac, rss] : field(e, "fp", "radio map entry").items()) {
                if (!is_valid_mac(mac)) throw ValidationError("invalid MAC \"" + mac + "\" in radio map");
                entry.fingerprint[mac] = rss.get<int>();
            }
            if (entry.fingerprint.empty()) throw ValidationError("radio map entry with empty fingerprint");
            map.entries.push_back(std::move(entry));
        }
        return map;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("radio map: ") + e.what());
    }
}

void save_radio_map(const RadioMap& map, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write radio map " + path.string());
    out << dump_radio_map(map);
}

RadioMap load_radio_map(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open radio map " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_radio_map(buf.str());
}

}  // namespace fpmap
