#include "osd/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace osd {

namespace {
constexpr char kMagic[8] = {'O', 'S', 'D', 'C', 'K', 'P', 'T', '1'};

void write_u64(std::ostream& out, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
}

uint64_t read_u64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
}
}  // namespace

void save_archive(const std::string& path, const Archive& a) {
    nlohmann::json manifest;
    manifest["format_version"] = Archive::kFormatVersion;
    manifest["meta"] = a.meta;
    nlohmann::json tl = nlohmann::json::array();
    for (const auto& [name, t] : a.tensors) {
        nlohmann::json e;
        e["name"] = name;
        e["shape"] = t.shape;
        tl.push_back(e);
    }
    manifest["tensors"] = tl;
    const std::string mstr = manifest.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_archive: cannot open " + path);
    out.write(kMagic, 8);
    write_u64(out, mstr.size());
    out.write(mstr.data(), static_cast<std::streamsize>(mstr.size()));
    for (const auto& [name, t] : a.tensors)
        out.write(reinterpret_cast<const char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (!out) throw std::runtime_error("save_archive: write failed for " + path);
}

Archive load_archive(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_archive: cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0) throw std::runtime_error("load_archive: bad magic in " + path);
    const uint64_t mlen = read_u64(in);
    std::string mstr(mlen, '\0');
    in.read(mstr.data(), static_cast<std::streamsize>(mlen));
    if (!in) throw std::runtime_error("load_archive: truncated manifest in " + path);

    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(mstr);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("load_archive: manifest parse error: ") + e.what());
    }
    if (!manifest.contains("format_version"))
        throw std::runtime_error("load_archive: manifest missing field 'format_version'");
    if (manifest["format_version"].get<int>() != Archive::kFormatVersion)
        throw std::runtime_error("load_archive: unsupported format_version " + manifest["format_version"].dump());
    if (!manifest.contains("tensors") || !manifest["tensors"].is_array())
        throw std::runtime_error("load_archive: manifest missing field 'tensors'");

    Archive a;
    a.meta = manifest.value("meta", nlohmann::json::object());
    for (const auto& e : manifest["tensors"]) {
        if (!e.contains("name") || !e.contains("shape"))
            throw std::runtime_error("load_archive: tensor entry missing 'name' or 'shape'");
        const std::string name = e["name"].get<std::string>();
        const std::vector<int> shape = e["shape"].get<std::vector<int>>();
        Tensor t(shape);
        in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * sizeof(double)));
        if (!in) throw std::runtime_error("load_archive: truncated data for tensor '" + name + "'");
        a.tensors.emplace(name, std::move(t));
    }
    return a;
}

Archive archive_from_store(const ParamStore& ps) {
    Archive a;
    nlohmann::json trainable = nlohmann::json::object();
    for (const auto& [name, p] : ps.raw()) {
        a.tensors.emplace(name, p.value);
        trainable[name] = p.trainable;
    }
    a.meta["trainable"] = trainable;
    return a;
}

void archive_into_store(const Archive& a, ParamStore& ps) {
    for (const auto& [name, t] : a.tensors) {
        if (name.rfind("opt.", 0) == 0) continue;  // optimizer state handled by the trainer
        if (!ps.has(name)) throw std::runtime_error("archive_into_store: unknown parameter '" + name + "'");
        auto& p = ps.at(name);
        if (p.value.shape != t.shape)
            throw std::runtime_error("archive_into_store: shape mismatch for '" + name + "': store " +
                                     shape_str(p.value.shape) + " vs archive " + shape_str(t.shape));
        p.value = t;
    }
}

}  // namespace osd
