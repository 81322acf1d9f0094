// config.hpp — Run configuration: strict INI-style file with [model],
// [scaling], and [ensemble] sections, defaults mirroring the reference
// parameter set, and per-field provenance for the manifest.

#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <json.hpp>

#include "qmelt/model.hpp"

namespace qmelt::cfg {

enum class ScalingMode { Standard, Dual };

struct RunConfig {
    model::TildeParams tilde;  // [model] holds the reference (tilde) values
    double aleph = 1.0;
    ScalingMode mode = ScalingMode::Standard;

    std::size_t n_traj = 30000;
    double dt = 1e-3;
    double t_end = 100.0;
    std::size_t stride = 100;
    std::uint64_t seed = 1;

    // field name -> "default" | "file" | "flag"
    std::map<std::string, std::string> provenance;

    // physical parameters after applying the configured scaling
    model::ModelParams physical() const;

    nlohmann::json to_json() const;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Parse and validate; unknown sections or keys fail with the line number.
// An empty file yields the full default configuration.
RunConfig parse_config(const std::filesystem::path& path);

// In-memory variant used by tests and flag handling.
RunConfig parse_config_text(const std::string& text, const std::string& origin = "<memory>");

}  // namespace qmelt::cfg
