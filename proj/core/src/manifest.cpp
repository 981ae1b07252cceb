#include "osd/manifest.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace osd {

std::string config_hash(const nlohmann::json& config) {
    const std::string s = config.dump();
    uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

nlohmann::json RunManifest::to_json() const {
    nlohmann::json j;
    j["manifest_schema"] = 1;
    j["command"] = command;
    j["config_hash"] = config_hash;
    j["seed"] = seed;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    j["version"] = version;
    j["wall_time_sec"] = wall_time_sec;
    return j;
}

void RunManifest::write(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("RunManifest: cannot write " + path);
    out << to_json().dump(2) << "\n";
}

}  // namespace osd
