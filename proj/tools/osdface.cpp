// osdface: batch front end for the restoration pipeline. Subcommands cover
// dataset synthesis, degradation, both training stages, restoration,
// evaluation, codebook inspection and comparison grids. Exit codes:
// 0 success, 1 partial per-file failures, 2 usage/config errors.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "osd/checkpoint.hpp"
#include "osd/degrade.hpp"
#include "osd/faces.hpp"
#include "osd/image_io.hpp"
#include "osd/manifest.hpp"
#include "osd/metrics.hpp"
#include "osd/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0, kExitPartial = 1, kExitUsage = 2;

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

void write_manifest(osd::RunManifest m, const std::string& path, const Timer& timer) {
    m.wall_time_sec = timer.seconds();
    m.write(path);
}

std::string strip_png(const std::string& name) { return name.substr(0, name.size() - 4); }

void copy_landmark_sidecar(const std::string& in_dir, const std::string& out_dir, const std::string& name) {
    const fs::path src = fs::path(in_dir) / (strip_png(name) + ".landmarks.txt");
    if (fs::exists(src)) fs::copy_file(src, fs::path(out_dir) / src.filename(), fs::copy_options::overwrite_existing);
}

// images shared by both dirs, paired by sorted basename
std::pair<std::vector<osd::Tensor>, std::vector<osd::Tensor>> load_paired(const std::string& hq_dir,
                                                                          const std::string& lq_dir) {
    auto hq_names = osd::list_images(hq_dir);
    auto lq_names = osd::list_images(lq_dir);
    std::set<std::string> lq_set(lq_names.begin(), lq_names.end());
    std::vector<osd::Tensor> hq, lq;
    for (const auto& name : hq_names) {
        if (!lq_set.count(name)) continue;
        hq.push_back(osd::load_image((fs::path(hq_dir) / name).string()));
        lq.push_back(osd::load_image((fs::path(lq_dir) / name).string()));
    }
    if (hq.empty()) throw std::runtime_error("no paired .png images between " + hq_dir + " and " + lq_dir);
    return {std::move(hq), std::move(lq)};
}

osd::TrainConfig read_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot read config file " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const std::exception& e) {
        throw std::invalid_argument(std::string("config parse error: ") + e.what());
    }
    osd::TrainConfig cfg = osd::TrainConfig::from_json(j);
    cfg.validate();
    return cfg;
}

int cmd_synth(const std::string& out_dir, int count, uint64_t seed, int size) {
    Timer timer;
    fs::create_directories(out_dir);
    auto faces = osd::make_face_dataset(seed, count, size);
    for (int i = 0; i < count; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "face_%04d", i);
        osd::save_image((fs::path(out_dir) / (std::string(name) + ".png")).string(), faces[static_cast<size_t>(i)].image);
        osd::write_landmarks((fs::path(out_dir) / (std::string(name) + ".landmarks.txt")).string(),
                             faces[static_cast<size_t>(i)].landmarks);
    }
    osd::RunManifest m;
    m.command = "synth";
    m.seed = seed;
    m.config_hash = osd::config_hash(json{{"count", count}, {"seed", seed}, {"size", size}});
    m.inputs = json::object();
    m.outputs = {{"dir", out_dir}, {"images", count}};
    write_manifest(m, (fs::path(out_dir) / "manifest.json").string(), timer);
    return kExitOk;
}

int cmd_degrade(const std::string& in_dir, const std::string& out_dir, const std::string& recipe_path, uint64_t seed) {
    Timer timer;
    auto names = osd::list_images(in_dir);
    if (names.empty()) {
        std::cerr << "degrade: no .png images in " << in_dir << "\n";
        return kExitUsage;
    }
    osd::DegradationRecipe recipe;
    if (!recipe_path.empty()) {
        std::ifstream in(recipe_path);
        if (!in) {
            std::cerr << "degrade: cannot read recipe " << recipe_path << "\n";
            return kExitUsage;
        }
        json j = json::parse(in);
        recipe.blur_sigma_lo = j.value("blur_sigma_lo", recipe.blur_sigma_lo);
        recipe.blur_sigma_hi = j.value("blur_sigma_hi", recipe.blur_sigma_hi);
        recipe.down_factor_lo = j.value("down_factor_lo", recipe.down_factor_lo);
        recipe.down_factor_hi = j.value("down_factor_hi", recipe.down_factor_hi);
        recipe.noise_sigma_lo = j.value("noise_sigma_lo", recipe.noise_sigma_lo);
        recipe.noise_sigma_hi = j.value("noise_sigma_hi", recipe.noise_sigma_hi);
        recipe.quality_lo = j.value("quality_lo", recipe.quality_lo);
        recipe.quality_hi = j.value("quality_hi", recipe.quality_hi);
        recipe.stages = j.value("stages", recipe.stages);
        recipe.compress = j.value("compress", recipe.compress);
    }
    try {
        recipe.validate();
    } catch (const std::exception& e) {
        std::cerr << "degrade: " << e.what() << "\n";
        return kExitUsage;
    }
    fs::create_directories(out_dir);

    std::vector<std::string> failures;
    int produced = 0;
    for (size_t i = 0; i < names.size(); ++i) {
        const std::string& name = names[i];
        try {
            osd::Tensor hq = osd::load_image((fs::path(in_dir) / name).string());
            osd::DegradationRecipe per = recipe;
            per.seed = osd::Rng::derive(seed, i).next_u64();
            osd::DegradeResult r = osd::degrade(hq, per);
            osd::save_image((fs::path(out_dir) / name).string(), r.image);
            json sidecar;
            sidecar["source"] = name;
            sidecar["seed"] = per.seed;
            sidecar["stages"] = json::array();
            for (const auto& sp : r.params)
                sidecar["stages"].push_back({{"blur_sigma", sp.blur_sigma},
                                             {"down_factor", sp.down_factor},
                                             {"noise_sigma", sp.noise_sigma},
                                             {"quality", sp.quality}});
            std::ofstream sc((fs::path(out_dir) / (strip_png(name) + ".params.json")).string());
            sc << sidecar.dump() << "\n";
            copy_landmark_sidecar(in_dir, out_dir, name);
            ++produced;
        } catch (const std::exception& e) {
            failures.push_back(name + ": " + e.what());
        }
    }
    for (const auto& f : failures) std::cerr << "degrade: " << f << "\n";

    osd::RunManifest m;
    m.command = "degrade";
    m.seed = seed;
    m.config_hash = osd::config_hash(json{{"recipe", recipe_path},
                                          {"stages", recipe.stages},
                                          {"compress", recipe.compress},
                                          {"seed", seed}});
    m.inputs = {{"dir", in_dir}, {"recipe", recipe_path}};
    m.outputs = {{"dir", out_dir}, {"images", produced}, {"failures", failures}};
    write_manifest(m, (fs::path(out_dir) / "manifest.json").string(), timer);
    return failures.empty() ? kExitOk : kExitPartial;
}

int cmd_train_vre(const std::string& config_path, const std::string& hq_dir, const std::string& lq_dir,
                  const std::string& out_dir, const std::string& resume, const std::string& phase) {
    Timer timer;
    osd::TrainConfig cfg = read_config(config_path);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (cfg.out_dir.empty()) throw std::invalid_argument("train-vre: out_dir is required (config or --out)");
    osd::Stage1Dataset data;
    std::tie(data.hq, data.lq) = load_paired(hq_dir, lq_dir);
    osd::TrainOutcome out = osd::train_vre(data, cfg, resume, phase);

    osd::RunManifest m;
    m.command = "train-vre";
    m.seed = cfg.seed;
    m.config_hash = osd::config_hash(cfg.to_json());
    m.inputs = {{"config", config_path}, {"hq", hq_dir}, {"lq", lq_dir}, {"resume", resume}, {"phase", phase}};
    m.outputs = {{"checkpoint", out.checkpoint_path}, {"log_lines", out.log.size()}};
    write_manifest(m, (fs::path(cfg.out_dir) / "manifest.json").string(), timer);
    return kExitOk;
}

int cmd_train_osd(const std::string& config_path, const std::string& vre_ckpt, const std::string& hq_dir,
                  const std::string& lq_dir, const std::string& out_dir, const std::string& resume) {
    Timer timer;
    if (!fs::exists(vre_ckpt)) {
        std::cerr << "train-osd: VRE checkpoint not found: " << vre_ckpt << "\n";
        return kExitUsage;
    }
    osd::TrainConfig cfg = read_config(config_path);
    cfg.stage = "osd";
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (cfg.out_dir.empty()) throw std::invalid_argument("train-osd: out_dir is required (config or --out)");
    osd::Stage2Dataset data;
    std::tie(data.hq, data.lq) = load_paired(hq_dir, lq_dir);
    osd::TrainOutcome out = osd::train_osd(data, vre_ckpt, cfg, resume);

    osd::RunManifest m;
    m.command = "train-osd";
    m.seed = cfg.seed;
    m.config_hash = osd::config_hash(cfg.to_json());
    m.inputs = {{"config", config_path}, {"vre", vre_ckpt}, {"hq", hq_dir}, {"lq", lq_dir}, {"resume", resume}};
    m.outputs = {{"checkpoint", out.checkpoint_path},
                 {"log_lines", out.log.size()},
                 {"g_updates", out.g_updates},
                 {"d_updates", out.d_updates}};
    write_manifest(m, (fs::path(cfg.out_dir) / "manifest.json").string(), timer);
    return kExitOk;
}

int cmd_restore(const std::string& in_dir, const std::string& ckpt, const std::string& out_dir, bool overlap) {
    Timer timer;
    auto names = osd::list_images(in_dir);
    if (names.empty()) {
        std::cerr << "restore: no .png images in " << in_dir << "\n";
        return kExitUsage;
    }
    auto bundle = osd::load_restorer(ckpt);
    fs::create_directories(out_dir);
    bundle->unet.reset_calls();

    std::vector<std::string> failures;
    int produced = 0;
    for (const auto& name : names) {
        try {
            osd::Tensor lq = osd::load_image((fs::path(in_dir) / name).string());
            osd::Tensor restored = osd::restore_image(*bundle, lq, overlap);
            osd::save_image((fs::path(out_dir) / name).string(), restored);
            copy_landmark_sidecar(in_dir, out_dir, name);
            ++produced;
        } catch (const std::exception& e) {
            failures.push_back(name + ": " + e.what());
        }
    }
    for (const auto& f : failures) std::cerr << "restore: " << f << "\n";

    const double wall = timer.seconds();
    osd::RunManifest m;
    m.command = "restore";
    m.config_hash = osd::config_hash(json{{"ckpt", ckpt}, {"overlap_embed", overlap}});
    m.inputs = {{"dir", in_dir}, {"checkpoint", ckpt}, {"overlap_embed", overlap}};
    m.outputs = {{"dir", out_dir},
                 {"images", produced},
                 {"failures", failures},
                 {"denoiser_calls", bundle->unet.call_count()},
                 {"images_per_sec", produced > 0 ? produced / wall : 0.0}};
    write_manifest(m, (fs::path(out_dir) / "manifest.json").string(), timer);
    return failures.empty() ? kExitOk : kExitPartial;
}

int cmd_evaluate(const std::string& restored_dir, const std::string& reference_dir,
                 const std::vector<std::string>& metrics, const std::string& out_file) {
    Timer timer;
    osd::EvalConfig cfg;
    if (!metrics.empty()) cfg.metrics = metrics;
    osd::EvalReport report;
    try {
        report = osd::evaluate_suite(restored_dir, reference_dir, cfg);
    } catch (const std::invalid_argument& e) {
        std::cerr << "evaluate: " << e.what() << "\n";
        return kExitUsage;
    }
    json j;
    j["metrics"] = json::array();
    for (const auto& e : report.entries) j["metrics"].push_back({{"name", e.name}, {"value", e.value}, {"n", e.n}});
    j["pairing_failures"] = report.pairing_failures;
    std::ofstream out(out_file);
    if (!out) throw std::runtime_error("evaluate: cannot write " + out_file);
    out << j.dump(2) << "\n";
    for (const auto& f : report.pairing_failures) std::cerr << "evaluate: " << f << "\n";

    osd::RunManifest m;
    m.command = "evaluate";
    m.config_hash = osd::config_hash(json{{"metrics", cfg.metrics}});
    m.inputs = {{"restored", restored_dir}, {"reference", reference_dir}};
    m.outputs = {{"report", out_file}, {"pairing_failures", report.pairing_failures.size()}};
    write_manifest(m, out_file + ".manifest.json", timer);
    return report.pairing_failures.empty() ? kExitOk : kExitPartial;
}

int cmd_inspect(const std::string& ckpt, const std::string& image_path, const std::string& out_dir) {
    Timer timer;
    osd::Archive a = osd::load_archive(ckpt);
    if (!a.meta.contains("config")) throw std::runtime_error("inspect: checkpoint missing 'config' metadata");
    osd::TrainConfig cfg = osd::TrainConfig::from_json(a.meta["config"]);

    // rebuild the stage-1 parameter set so the archive loads shape-exact
    osd::ParamStore ps;
    osd::Rng rng(cfg.seed);
    osd::VreModel vre = osd::VreModel::create(ps, cfg.vre, rng);
    osd::PatchDiscriminator::create(ps, "pdisc.hq", rng);
    osd::PatchDiscriminator::create(ps, "pdisc.lq", rng);
    osd::SeededPyramidExtractor fx(ps, "fx", cfg.seed ^ 0x5eedf00dull);
    osd::archive_into_store(a, ps);

    osd::Tensor img = osd::load_image(image_path);
    osd::InspectionBundle b = osd::inspect(vre, {img}, ps);

    fs::create_directories(out_dir);
    osd::save_grayscale((fs::path(out_dir) / "attention.png").string(), b.attention);
    for (size_t i = 0; i < b.att_maps.size(); ++i)
        osd::save_grayscale((fs::path(out_dir) / ("att_" + std::to_string(b.att_indices[i]) + ".png")).string(),
                            b.att_maps[i]);
    for (size_t i = 0; i < b.enc_maps.size(); ++i)
        osd::save_grayscale((fs::path(out_dir) / ("enc_" + std::to_string(b.enc_indices[i]) + ".png")).string(),
                            b.enc_maps[i]);
    std::ofstream hist((fs::path(out_dir) / "usage.json").string());
    hist << json(b.usage).dump() << "\n";

    osd::RunManifest m;
    m.command = "inspect";
    m.seed = cfg.seed;
    m.config_hash = osd::config_hash(cfg.to_json());
    m.inputs = {{"checkpoint", ckpt}, {"image", image_path}};
    m.outputs = {{"dir", out_dir}, {"att_maps", b.att_maps.size()}, {"enc_maps", b.enc_maps.size()}};
    write_manifest(m, (fs::path(out_dir) / "manifest.json").string(), timer);
    return kExitOk;
}

int cmd_grid(const std::vector<std::string>& col_specs, const std::string& out_file) {
    Timer timer;
    std::vector<std::string> labels, dirs;
    for (const auto& spec : col_specs) {
        const size_t eq = spec.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
            std::cerr << "grid: --col expects label=dir, got '" << spec << "'\n";
            return kExitUsage;
        }
        labels.push_back(spec.substr(0, eq));
        dirs.push_back(spec.substr(eq + 1));
    }
    // rows = basenames present in every column
    std::vector<std::string> common = osd::list_images(dirs[0]);
    for (size_t c = 1; c < dirs.size(); ++c) {
        auto names = osd::list_images(dirs[c]);
        std::set<std::string> s(names.begin(), names.end());
        std::erase_if(common, [&](const std::string& n) { return !s.count(n); });
    }
    if (common.empty()) {
        std::cerr << "grid: no common basenames across columns\n";
        return kExitUsage;
    }
    std::vector<std::vector<osd::Tensor>> rows;
    for (const auto& name : common) {
        std::vector<osd::Tensor> row;
        for (const auto& dir : dirs) row.push_back(osd::load_image((fs::path(dir) / name).string()));
        rows.push_back(std::move(row));
    }
    osd::save_image(out_file, osd::compose_grid(rows, labels));

    osd::RunManifest m;
    m.command = "grid";
    m.config_hash = osd::config_hash(json{{"cols", col_specs}});
    m.inputs = {{"columns", col_specs}};
    m.outputs = {{"file", out_file}, {"rows", common.size()}, {"cols", dirs.size()}};
    write_manifest(m, out_file + ".manifest.json", timer);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"one-step diffusion face restoration pipeline"};
    app.require_subcommand(1);

    std::string in_dir, out_dir, out_file, recipe, config, ckpt, vre_ckpt, resume, phase, image_path;
    std::string restored_dir, reference_dir;
    std::vector<std::string> metrics, col_specs;
    uint64_t seed = 0;
    int count = 16, size = 64;
    bool overlap = false;

    auto* synth = app.add_subcommand("synth", "generate a procedural face dataset with landmark sidecars");
    synth->add_option("--out", out_dir)->required();
    synth->add_option("--count", count);
    synth->add_option("--seed", seed);
    synth->add_option("--size", size);

    auto* deg = app.add_subcommand("degrade", "apply the dual-stage degradation to a directory");
    deg->add_option("--in", in_dir)->required();
    deg->add_option("--out", out_dir)->required();
    deg->add_option("--recipe", recipe);
    deg->add_option("--seed", seed);

    auto* tvre = app.add_subcommand("train-vre", "stage-1 embedder training (hq, lq, assoc phases)");
    tvre->add_option("--config", config)->required();
    tvre->add_option("--hq", in_dir)->required();
    tvre->add_option("--lq", reference_dir)->required();
    tvre->add_option("--out", out_dir);
    tvre->add_option("--resume", resume);
    tvre->add_option("--phase", phase);

    auto* tosd = app.add_subcommand("train-osd", "stage-2 one-step restorer training");
    tosd->add_option("--config", config)->required();
    tosd->add_option("--vre", vre_ckpt)->required();
    tosd->add_option("--hq", in_dir)->required();
    tosd->add_option("--lq", reference_dir)->required();
    tosd->add_option("--out", out_dir);
    tosd->add_option("--resume", resume);

    auto* rest = app.add_subcommand("restore", "one-step restoration of a directory");
    rest->add_option("--in", in_dir)->required();
    rest->add_option("--ckpt", ckpt)->required();
    rest->add_option("--out", out_dir)->required();
    rest->add_flag("--overlap-embed", overlap);

    auto* eval = app.add_subcommand("evaluate", "metric battery over restored vs reference directories");
    eval->add_option("--restored", restored_dir)->required();
    eval->add_option("--reference", reference_dir)->required();
    eval->add_option("--metrics", metrics)->delimiter(',');
    eval->add_option("--out", out_file)->required();

    auto* insp = app.add_subcommand("inspect", "export attention maps and dictionary usage for one image");
    insp->add_option("--ckpt", ckpt)->required();
    insp->add_option("--image", image_path)->required();
    insp->add_option("--out", out_dir)->required();

    auto* grid = app.add_subcommand("grid", "labeled side-by-side comparison grid");
    grid->add_option("--col", col_specs, "label=dir, repeatable")->required();
    grid->add_option("--out", out_file)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        if (synth->parsed()) return cmd_synth(out_dir, count, seed, size);
        if (deg->parsed()) return cmd_degrade(in_dir, out_dir, recipe, seed);
        if (tvre->parsed()) return cmd_train_vre(config, in_dir, reference_dir, out_dir, resume, phase);
        if (tosd->parsed()) return cmd_train_osd(config, vre_ckpt, in_dir, reference_dir, out_dir, resume);
        if (rest->parsed()) return cmd_restore(in_dir, ckpt, out_dir, overlap);
        if (eval->parsed()) return cmd_evaluate(restored_dir, reference_dir, metrics, out_file);
        if (insp->parsed()) return cmd_inspect(ckpt, image_path, out_dir);
        if (grid->parsed()) return cmd_grid(col_specs, out_file);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitPartial;
    }
    return kExitUsage;
}
