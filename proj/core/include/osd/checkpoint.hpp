#pragma once

#include <map>
#include <string>

#include <json.hpp>

#include "osd/nn.hpp"
#include "osd/tensor.hpp"

namespace osd {

// Single-file archive: magic + version, JSON manifest (tensor names,
// shapes, metadata), then raw little-endian doubles in manifest order.
struct Archive {
    static constexpr int kFormatVersion = 1;

    nlohmann::json meta;
    std::map<std::string, Tensor> tensors;
};

void save_archive(const std::string& path, const Archive& a);
Archive load_archive(const std::string& path);

// All store parameters (values only; trainability recorded in the manifest
// via meta["trainable"]).
Archive archive_from_store(const ParamStore& ps);

// Writes archive values into existing parameters; rejects unknown names
// and shape mismatches with a diagnostic naming the tensor.
void archive_into_store(const Archive& a, ParamStore& ps);

}  // namespace osd
