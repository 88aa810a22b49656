#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "texmesh/metrics.hpp"
#include "texmesh/pipeline.hpp"
#include "texmesh/shading.hpp"

namespace texmesh {

/// Rejected configuration: unknown key, wrong type or out-of-range value.
/// The message names the offending key as "section.key".
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct GridConfig {
    int res = 24;

    void validate() const;
};

struct MetricsConfig {
    int points = 2048;
    ChamferReduction reduction = ChamferReduction::Mean;
    unsigned long long seed = 0;

    void validate() const;
};

struct ShadingConfig {
    int lobes = 32;
    int steps = 7000;
    double step_size = 0.01;
    double roughness = 0.5;
    double metallic = 0.0;
    unsigned long long seed = 0;

    void validate() const;
};

/// One JSON document with a section per module. Every section is optional;
/// missing keys keep their defaults.
struct RunConfig {
    GridConfig grid;
    FitConfig fit;
    ToyGANConfig gan;
    MetricsConfig metrics;
    ShadingConfig shading;

    /// Throws ConfigError.
    void validate() const;
};

/// Parses and validates. Throws ConfigError on unknown keys, type
/// mismatches and range violations.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

nlohmann::json to_json(const RunConfig& c);
nlohmann::json to_json(const FitConfig& c);
nlohmann::json to_json(const ToyGANConfig& c);

FitConfig fit_config_from_json(const nlohmann::json& j);
ToyGANConfig gan_config_from_json(const nlohmann::json& j);

/// [{"axis": [x,y,z], "sharpness": s, "amplitude": [r,g,b]}, ...]
nlohmann::json lobes_to_json(const std::vector<SGLobe>& lobes);
std::vector<SGLobe> lobes_from_json(const nlohmann::json& j);

/// Generator weights plus the config that shapes them.
TensorBundle gan_checkpoint(const ToyGenerator& gen, const ToyGANConfig& cfg);
ToyGenerator generator_from_checkpoint(const TensorBundle& bundle, ToyGANConfig* cfg = nullptr);

} // namespace texmesh
