#pragma once

#include <atomic>
#include <memory>
#include <optional>

#include "osd/lora.hpp"
#include "osd/nn.hpp"
#include "osd/schedule.hpp"

namespace osd {

struct GeneratorConfig {
    int image_size = 64;
    int latent_h = 16, latent_w = 16, latent_c = 4;
    int T_L = 999;       // denoising timestep fed to the UNet
    int lora_rank = 4;   // paper-scale value is 16
    double lora_scale = 1.0;
    int prompt_dim = 64;

    void validate(int T) const;
};

// Convolutional VAE stand-in: 4x spatial downsample to latent_c channels,
// sigmoid image output.
struct AutoencoderModel {
    Conv2dLayer e1, e2, e3;
    Conv2dLayer d1, d2, d3;

    static AutoencoderModel create(ParamStore& ps, const std::string& prefix, const GeneratorConfig& cfg, Rng& rng);

    ad::Var encode(Binder& bind, ad::Var image) const;
    ad::Var decode(Binder& bind, ad::Var z) const;

    // inference conveniences (fresh tape, no gradients kept)
    Tensor encode(ParamStore& ps, const Tensor& image) const;
    Tensor decode(ParamStore& ps, const Tensor& z) const;
};

// Cross-attention whose four projections accept LoRA adapters.
struct AdaptedCrossAttention {
    LinearLayer q, k, v, o;
    int d_attn = 0;
    std::optional<LoraAdapter> lq, lk, lv, lo;

    static AdaptedCrossAttention create(ParamStore& ps, const std::string& name, int c, int d_prompt, int d_attn,
                                        Rng& rng);
    ad::Var forward(Binder& bind, ad::Var x, ad::Var prompt) const;
};

// Two-level U-shaped epsilon predictor with one cross-attention block per
// level. Every forward bumps the call counter (one-step contract checks).
struct DenoiserModel {
    int latent_c = 4, width = 32, d_prompt = 64;
    Conv2dLayer conv_in, lvl1_conv, down, lvl2_conv, up_conv, fuse, conv_out;
    LinearLayer temb1, temb2;
    AdaptedCrossAttention xattn1, xattn2;
    std::optional<LoraAdapter> lora_lvl2, lora_down;
    std::shared_ptr<std::atomic<int64_t>> calls = std::make_shared<std::atomic<int64_t>>(0);

    static DenoiserModel create(ParamStore& ps, const std::string& prefix, const GeneratorConfig& cfg, Rng& rng);

    // z: [c,h,w], prompt: [K, d_prompt], t in [0,T]
    ad::Var forward(Binder& bind, ad::Var z, ad::Var prompt, int t) const;

    int64_t call_count() const { return calls->load(); }
    void reset_calls() { calls->store(0); }
};

// Attaches LoRA adapters ("lora." parameter prefix) to the attention
// projections and the two widest convolutions.
void apply_lora(DenoiserModel& model, ParamStore& ps, const GeneratorConfig& cfg, Rng& rng);

// Differentiable one-step restoration graph.
struct RestoreGraph {
    ad::Var z_L;
    ad::Var eps_hat;
    ad::Var z_hat;
    ad::Var image;  // decoded, unclamped (decoder output is already in (0,1))
};

RestoreGraph one_step_restore_graph(Binder& bind, ad::Var image_lq, const Tensor& prompt, const DenoiserModel& model,
                                    const AutoencoderModel& ae, const GeneratorConfig& cfg,
                                    const NoiseSchedule& sched);

// Same, but from a precomputed LQ latent so a runner can overlap VRE
// embedding with latent encoding.
RestoreGraph one_step_restore_from_latent(Binder& bind, ad::Var z_L, const Tensor& prompt, const DenoiserModel& model,
                                          const AutoencoderModel& ae, const GeneratorConfig& cfg,
                                          const NoiseSchedule& sched);

// Inference entry point: exactly one denoiser evaluation, output clamped
// to [0,1].
Tensor one_step_restore(const Tensor& image_lq, const Tensor& prompt, const DenoiserModel& model,
                        const AutoencoderModel& ae, const GeneratorConfig& cfg, const NoiseSchedule& sched,
                        ParamStore& ps);

// sinusoidal timestep features, dim entries
Tensor timestep_embedding(int t, int dim);

}  // namespace osd
