#pragma once

#include <map>
#include <stdexcept>
#include <string>

namespace osd {

// Flat name -> scalar record; one per training iteration in the
// line-delimited log.
struct LossReport {
    std::map<std::string, double> values;

    double at(const std::string& name) const {
        auto it = values.find(name);
        if (it == values.end()) throw std::out_of_range("LossReport: missing component " + name);
        return it->second;
    }
    bool has(const std::string& name) const { return values.count(name) > 0; }
    void set(const std::string& name, double v) { values[name] = v; }
};

}  // namespace osd
