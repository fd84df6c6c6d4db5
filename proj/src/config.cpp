#include "fpmap/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include <json.hpp>

#include "fpmap/error.hpp"

namespace fpmap {

using nlohmann::json;

namespace {

struct Field {
    std::string key;
    std::function<json(const PipelineConfig&)> get;
    std::function<void(PipelineConfig&, const json&)> set;
};

template <class Section, class T>
Field number(std::string key, Section PipelineConfig::*section, T Section::*member) {
    return {key, [=](const PipelineConfig& c) { return json((c.*section).*member); },
            [=, k = key](PipelineConfig& c, const json& v) {
                if constexpr (std::is_integral_v<T>) {
                    if (!v.is_number_integer()) throw SchemaError("config key " + k + " expects an integer");
                } else {
                    if (!v.is_number()) throw SchemaError("config key " + k + " expects a number");
                }
                (c.*section).*member = v.get<T>();
            }};
}

Field text(std::string key, std::function<std::string(const PipelineConfig&)> get,
           std::function<void(PipelineConfig&, const std::string&)> set) {
    return {key, [=](const PipelineConfig& c) { return json(get(c)); },
            [=, k = key](PipelineConfig& c, const json& v) {
                if (!v.is_string()) throw SchemaError("config key " + k + " expects a string");
                set(c, v.get<std::string>());
            }};
}

const std::vector<Field>& fields() {
    using C = PipelineConfig;
    static const std::vector<Field> table = [] {
        std::vector<Field> f;
        f.push_back(number("sensors.acc_window", &C::sensors, &SensorConfig::acc_window));
        f.push_back(number("sensors.variance_threshold", &C::sensors, &SensorConfig::variance_threshold));
        f.push_back(number("sensors.motion_hop", &C::sensors, &SensorConfig::motion_hop));
        f.push_back(number("sensors.smoothing_width", &C::sensors, &SensorConfig::smoothing_width));
        f.push_back(number("sensors.min_step_gap", &C::sensors, &SensorConfig::min_step_gap));
        f.push_back(number("sensors.peak_prominence", &C::sensors, &SensorConfig::peak_prominence));

        f.push_back(number("landmarks.gyro_threshold", &C::landmarks, &LandmarkConfig::gyro_threshold));
        f.push_back(number("landmarks.gyro_window", &C::landmarks, &LandmarkConfig::gyro_window));
        f.push_back(number("landmarks.baro_flat", &C::landmarks, &LandmarkConfig::baro_flat));
        f.push_back(number("landmarks.baro_delta", &C::landmarks, &LandmarkConfig::baro_delta));
        f.push_back(number("landmarks.baro_window", &C::landmarks, &LandmarkConfig::baro_window));
        f.push_back(number("landmarks.walking_min", &C::landmarks, &LandmarkConfig::walking_min));
        f.push_back(number("landmarks.still_min", &C::landmarks, &LandmarkConfig::still_min));
        f.push_back(number("landmarks.still_max", &C::landmarks, &LandmarkConfig::still_max));

        f.push_back(number("pdr.step_length", &C::pdr, &PdrConfig::step_length));
        f.push_back(number("pdr.pressure_per_floor", &C::pdr, &PdrConfig::pressure_per_floor));
        f.push_back({"pdr.heading_threshold_deg",
                     [](const C& c) { return json(std::round(rad_to_deg(c.pdr.heading_threshold) * 1e9) / 1e9); },
                     [](C& c, const json& v) {
                         if (!v.is_number()) throw SchemaError("config key pdr.heading_threshold_deg expects a number");
                         c.pdr.heading_threshold = deg_to_rad(v.get<double>());
                     }});
        f.push_back(number("pdr.confidence_threshold", &C::pdr, &PdrConfig::confidence_threshold));
        f.push_back(number("pdr.distance_floor", &C::pdr, &PdrConfig::distance_floor));
        f.push_back(number("pdr.max_hops", &C::pdr, &PdrConfig::max_hops));
        f.push_back(number("pdr.min_steps_for_length", &C::pdr, &PdrConfig::min_steps_for_length));
        f.push_back(number("pdr.compass_window", &C::pdr, &PdrConfig::compass_window));
        f.push_back(text(
            "pdr.mode", [](const C& c) { return heading_source_name(c.pdr.heading_source); },
            [](C& c, const std::string& s) { c.pdr.heading_source = parse_heading_source(s); }));

        f.push_back(number("radiomap.t_min", &C::radiomap, &QualityConfig::t_min));
        f.push_back(number("radiomap.t_max", &C::radiomap, &QualityConfig::t_max));
        f.push_back(number("radiomap.belief_threshold", &C::radiomap, &QualityConfig::belief_threshold));
        f.push_back(number("radiomap.sigma_floor", &C::radiomap, &QualityConfig::sigma_floor));
        f.push_back({"radiomap.belief_ceiling",
                     [](const C& c) { return c.radiomap.belief_ceiling ? json(*c.radiomap.belief_ceiling) : json(nullptr); },
                     [](C& c, const json& v) {
                         if (v.is_null()) {
                             c.radiomap.belief_ceiling.reset();
                         } else if (v.is_number()) {
                             c.radiomap.belief_ceiling = v.get<double>();
                         } else {
                             throw SchemaError("config key radiomap.belief_ceiling expects a number or null");
                         }
                     }});

        f.push_back(number("localization.k", &C::localization, &LocalizationConfig::k));
        f.push_back(number("localization.tau", &C::localization, &LocalizationConfig::tau));
        f.push_back(text(
            "localization.metric", [](const C& c) { return metric_name(c.localization.metric); },
            [](C& c, const std::string& s) { c.localization.metric = parse_metric(s); }));
        f.push_back(text(
            "localization.tau_scope", [](const C& c) { return tau_scope_name(c.localization.tau_scope); },
            [](C& c, const std::string& s) { c.localization.tau_scope = parse_tau_scope(s); }));

        f.push_back(number("graph.heading_tolerance_deg", &C::graph, &GraphLoadOptions::heading_tolerance_deg));
        f.push_back(number("graph.distance_tolerance_m", &C::graph, &GraphLoadOptions::distance_tolerance_m));
        return f;
    }();
    return table;
}

const Field& find_field(const std::string& key) {
    for (const auto& f : fields())
        if (f.key == key) return f;
    throw SchemaError("unknown config key \"" + key + "\"");
}

void set_json(PipelineConfig& cfg, const std::string& key, const json& value) {
    find_field(key).set(cfg, value);
}

}  // namespace

void PipelineConfig::validate() const {
    sensors.validate();
    landmarks.validate();
    pdr.validate();
    radiomap.validate();
    localization.validate();
}

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& f : fields()) keys.push_back(f.key);
    return keys;
}

void set_config_value(PipelineConfig& cfg, const std::string& key, const std::string& value) {
    const Field& f = find_field(key);
    json parsed = json::parse(value, nullptr, false);
    if (parsed.is_discarded()) parsed = value;
    f.set(cfg, parsed);
}

void apply_override(PipelineConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ParseError("override \"" + assignment + "\" must look like key=value");
    set_config_value(cfg, assignment.substr(0, eq), assignment.substr(eq + 1));
}

void apply_config_json(PipelineConfig& cfg, const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("config: ") + e.what());
    }
    if (!doc.is_object()) throw SchemaError("config must be a JSON object");
    for (const auto& [section, body] : doc.items()) {
        if (section == "version") {
            if (!body.is_number_integer() || body.get<int>() != kConfigVersion)
                throw SchemaError("unsupported config version " + body.dump());
            continue;
        }
        const bool known = std::any_of(fields().begin(), fields().end(),
                                       [&](const Field& f) { return f.key.rfind(section + ".", 0) == 0; });
        if (!known || !body.is_object()) throw SchemaError("unknown config key \"" + section + "\"");
        for (const auto& [name, value] : body.items()) set_json(cfg, section + "." + name, value);
    }
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    PipelineConfig cfg;
    apply_config_json(cfg, buf.str());
    return cfg;
}

std::string config_to_json(const PipelineConfig& cfg) {
    json doc = json::object();
    doc["version"] = kConfigVersion;
    for (const auto& f : fields()) {
        const auto dot = f.key.find('.');
        doc[f.key.substr(0, dot)][f.key.substr(dot + 1)] = f.get(cfg);
    }
    return doc.dump(2) + "\n";
}

}  // namespace fpmap
