#pragma once

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "osd/generator.hpp"
#include "osd/losses.hpp"
#include "osd/report.hpp"
#include "osd/vre.hpp"

namespace osd {

struct TrainConfig {
    std::string stage = "vre";  // "vre" (hq -> lq -> assoc) or "osd"

    // stage 1 phase iteration counts (paper-scale epochs: 50 HQ / 10 LQ /
    // +10 assoc, expressed here as iterations)
    int iters_hq = 200, iters_lq = 100, iters_assoc = 100;
    int batch = 4;
    double lr = 1.44e-4;
    double beta = 0.25;
    double temperature = 0.07;
    double lambda_per = 1.0, lambda_dis = 0.8, lambda_assoc = 1.0;
    int gan_start = 100;  // per-phase iterations before the adversarial term engages

    // stage 2
    int iterations = 300;  // alternating G/D steps
    int warmup_ae = 120, warmup_unet = 120;  // pretrained-backbone stand-in pre-fit
    int batch_osd = 2;
    double lr_osd = 1e-4;
    double weight_decay_osd = 1e-2;
    LossWeights weights_osd;

    // shared
    uint64_t seed = 17;
    int checkpoint_every = 0;  // 0 = final only
    std::string out_dir;

    VreConfig vre;
    GeneratorConfig gen;
    int T = 1000;
    double beta_start = 8.5e-4, beta_end = 1.2e-2;

    // optimizer constants (stage-agnostic defaults)
    double adam_beta1 = 0.9, adam_beta2 = 0.999, adam_eps = 1e-8;

    void validate() const;
    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

struct Stage1Dataset {
    std::vector<Tensor> hq;
    std::vector<Tensor> lq;  // paired, same order
};

struct Stage2Dataset {
    std::vector<Tensor> hq;
    std::vector<Tensor> lq;
};

struct TrainOutcome {
    std::string checkpoint_path;
    std::vector<LossReport> log;
    int g_updates = 0, d_updates = 0;
    // whole-dataset image MSE measured right before and right after the
    // stage-2 alternation loop
    double mse_before = 0.0, mse_after = 0.0;
    uint64_t unet_hash_before = 0, unet_hash_after = 0;
    uint64_t vre_hash_before = 0, vre_hash_after = 0;
};

// Stage-1 VRE training: HQ phase, LQ phase, association phase, in that
// order. `only_phase` restricts the run ("" = all three); the association
// phase refuses to start unless both earlier phases are recorded in the
// resume checkpoint.
TrainOutcome train_vre(const Stage1Dataset& data, const TrainConfig& cfg, const std::string& resume_path = "",
                       const std::string& only_phase = "");

// Stage-2 alternating G/D training on top of a finished VRE checkpoint.
// A seeded AE + base-UNet pre-fit stands in for the pretrained SD
// backbone; during alternation only lora.* and ldisc.* move.
TrainOutcome train_osd(const Stage2Dataset& data, const std::string& vre_checkpoint, const TrainConfig& cfg,
                       const std::string& resume_path = "");

// Inference-side bundle reconstructed from an OSD checkpoint.
struct RestorerBundle {
    ParamStore ps;
    VreModel vre;
    AutoencoderModel ae;
    DenoiserModel unet;
    GeneratorConfig gen;
    NoiseSchedule sched;

    RestorerBundle() = default;
    RestorerBundle(const RestorerBundle&) = delete;
};

std::unique_ptr<RestorerBundle> load_restorer(const std::string& osd_checkpoint);

// restore with optional VRE/encoder overlap; byte-identical either way
Tensor restore_image(RestorerBundle& b, const Tensor& image_lq, bool overlap_embed);

void append_log_line(const std::string& path, const LossReport& r);

}  // namespace osd
