#pragma once

#include <string>

#include <json.hpp>

namespace osd {

// One manifest per CLI invocation, written next to the command's outputs.
struct RunManifest {
    std::string command;
    std::string config_hash;
    uint64_t seed = 0;
    nlohmann::json inputs;   // paths / flags
    nlohmann::json outputs;  // paths / counters (e.g. denoiser calls)
    std::string version = "0.1.0";
    double wall_time_sec = 0.0;

    nlohmann::json to_json() const;
    void write(const std::string& path) const;
};

// stable hex digest of a JSON document (key order canonicalized by dump)
std::string config_hash(const nlohmann::json& config);

}  // namespace osd
