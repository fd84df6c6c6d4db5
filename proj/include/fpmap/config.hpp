#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fpmap/landmarks.hpp"
#include "fpmap/localization.hpp"
#include "fpmap/pdr.hpp"
#include "fpmap/radiomap.hpp"
#include "fpmap/sensors.hpp"

namespace fpmap {

/// Every tunable of the pipeline, addressable by dotted keys such as
/// "radiomap.belief_threshold".
struct PipelineConfig {
    SensorConfig sensors;
    LandmarkConfig landmarks;
    PdrConfig pdr;
    QualityConfig radiomap;
    LocalizationConfig localization;
    GraphLoadOptions graph;

    void validate() const;
};

constexpr int kConfigVersion = 1;

std::vector<std::string> config_keys();

/// Value parsed as JSON when possible, else taken as a bare string.
/// Throws SchemaError naming the key when it is unknown.
void set_config_value(PipelineConfig& cfg, const std::string& key, const std::string& value);

/// "key=value" form used on the command line.
void apply_override(PipelineConfig& cfg, const std::string& assignment);

/// Nested {"version":1, "pdr":{...}, ...} document; unknown keys are rejected.
void apply_config_json(PipelineConfig& cfg, const std::string& json_text);
PipelineConfig load_config(const std::filesystem::path& path);

/// Deterministic nested JSON with every key.
std::string config_to_json(const PipelineConfig& cfg);

}  // namespace fpmap
