#include "osd/generator.hpp"

#include <cmath>
#include <stdexcept>

namespace osd {

using ad::Var;

void GeneratorConfig::validate(int T) const {
    if (T_L < 0 || T_L > T) throw std::invalid_argument("GeneratorConfig: T_L must lie in [0,T]");
    if (lora_rank < 1) throw std::invalid_argument("GeneratorConfig: lora_rank must be >= 1");
}

AutoencoderModel AutoencoderModel::create(ParamStore& ps, const std::string& prefix, const GeneratorConfig& cfg,
                                          Rng& rng) {
    AutoencoderModel m;
    m.e1 = Conv2dLayer::create(ps, prefix + ".e1", 3, 32, 3, 2, 1, rng);
    m.e2 = Conv2dLayer::create(ps, prefix + ".e2", 32, 64, 3, 2, 1, rng);
    m.e3 = Conv2dLayer::create(ps, prefix + ".e3", 64, cfg.latent_c, 3, 1, 1, rng);
    m.d1 = Conv2dLayer::create(ps, prefix + ".d1", cfg.latent_c, 64, 3, 1, 1, rng);
    m.d2 = Conv2dLayer::create(ps, prefix + ".d2", 64, 32, 3, 1, 1, rng);
    m.d3 = Conv2dLayer::create(ps, prefix + ".d3", 32, 3, 3, 1, 1, rng);
    return m;
}

Var AutoencoderModel::encode(Binder& bind, Var image) const {
    Var h = ad::silu(e1.forward(bind, image));
    h = ad::silu(e2.forward(bind, h));
    return e3.forward(bind, h);
}

Var AutoencoderModel::decode(Binder& bind, Var z) const {
    Var h = ad::silu(d1.forward(bind, z));
    h = ad::silu(d2.forward(bind, ad::upsample_nearest2x(h)));
    return ad::sigmoid(d3.forward(bind, ad::upsample_nearest2x(h)));
}

Tensor AutoencoderModel::encode(ParamStore& ps, const Tensor& image) const {
    ad::Tape tape;
    Binder bind(tape, ps);
    return encode(bind, bind.input(image)).val();
}

Tensor AutoencoderModel::decode(ParamStore& ps, const Tensor& z) const {
    ad::Tape tape;
    Binder bind(tape, ps);
    return decode(bind, bind.input(z)).val();
}

AdaptedCrossAttention AdaptedCrossAttention::create(ParamStore& ps, const std::string& name, int c, int d_prompt,
                                                    int d_attn, Rng& rng) {
    AdaptedCrossAttention a;
    a.d_attn = d_attn;
    a.q = LinearLayer::create(ps, name + ".q", c, d_attn, rng);
    a.k = LinearLayer::create(ps, name + ".k", d_prompt, d_attn, rng);
    a.v = LinearLayer::create(ps, name + ".v", d_prompt, d_attn, rng);
    a.o = LinearLayer::create(ps, name + ".o", d_attn, c, rng);
    return a;
}

Var AdaptedCrossAttention::forward(Binder& bind, Var x, Var prompt) const {
    Var Q = lora_linear(bind, x, q, lq ? &*lq : nullptr);
    Var K = lora_linear(bind, prompt, k, lk ? &*lk : nullptr);
    Var V = lora_linear(bind, prompt, v, lv ? &*lv : nullptr);
    Var logits = ad::affine(ad::matmul(Q, K, false, true), 1.0 / std::sqrt(static_cast<double>(d_attn)), 0.0);
    Var A = ad::softmax_rows(logits);
    Var out = lora_linear(bind, ad::matmul(A, V), o, lo ? &*lo : nullptr);
    return ad::add(x, out);
}

Tensor timestep_embedding(int t, int dim) {
    Tensor e({dim});
    const int half = dim / 2;
    for (int i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) / std::max(1, half - 1));
        e.data[static_cast<size_t>(2 * i)] = std::sin(t * freq);
        e.data[static_cast<size_t>(2 * i + 1)] = std::cos(t * freq);
    }
    return e;
}

DenoiserModel DenoiserModel::create(ParamStore& ps, const std::string& prefix, const GeneratorConfig& cfg, Rng& rng) {
    DenoiserModel m;
    m.latent_c = cfg.latent_c;
    m.width = 32;
    m.d_prompt = cfg.prompt_dim;
    const int w1 = m.width, w2 = 2 * m.width;
    m.conv_in = Conv2dLayer::create(ps, prefix + ".conv_in", cfg.latent_c, w1, 3, 1, 1, rng);
    m.lvl1_conv = Conv2dLayer::create(ps, prefix + ".lvl1_conv", w1, w1, 3, 1, 1, rng);
    m.down = Conv2dLayer::create(ps, prefix + ".down", w1, w2, 3, 2, 1, rng);
    m.lvl2_conv = Conv2dLayer::create(ps, prefix + ".lvl2_conv", w2, w2, 3, 1, 1, rng);
    m.up_conv = Conv2dLayer::create(ps, prefix + ".up_conv", w2, w1, 3, 1, 1, rng);
    m.fuse = Conv2dLayer::create(ps, prefix + ".fuse", 2 * w1, w1, 3, 1, 1, rng);
    m.conv_out = Conv2dLayer::create(ps, prefix + ".conv_out", w1, cfg.latent_c, 3, 1, 1, rng);
    m.temb1 = LinearLayer::create(ps, prefix + ".temb1", 32, w1, rng);
    m.temb2 = LinearLayer::create(ps, prefix + ".temb2", 32, w2, rng);
    m.xattn1 = AdaptedCrossAttention::create(ps, prefix + ".xattn1", w1, cfg.prompt_dim, w1, rng);
    m.xattn2 = AdaptedCrossAttention::create(ps, prefix + ".xattn2", w2, cfg.prompt_dim, w2, rng);
    return m;
}

namespace {

// [C,H,W] <-> [H*W, C] for attention over spatial positions
Var to_seq(Var x) {
    const Tensor& v = x.val();
    const int C = v.dim(0), HW = v.dim(1) * v.dim(2);
    return ad::transpose(ad::reshape(x, {C, HW}));
}

Var to_grid(Var x, int C, int H, int W) { return ad::reshape(ad::transpose(x), {C, H, W}); }

}  // namespace

Var DenoiserModel::forward(Binder& bind, Var z, Var prompt, int t) const {
    const Tensor& pv = prompt.val();
    if (pv.rank() != 2 || pv.dim(1) != d_prompt)
        throw std::invalid_argument("DenoiserModel: prompt width " + shape_str(pv.shape) + " does not match " +
                                    std::to_string(d_prompt));
    calls->fetch_add(1);

    Var temb = bind.input(timestep_embedding(t, 32).reshaped({1, 32}));
    Var t1 = ad::reshape(ad::silu(temb1.forward(bind, temb)), {width});
    Var t2 = ad::reshape(ad::silu(temb2.forward(bind, temb)), {2 * width});

    Var h1 = ad::silu(conv_in.forward(bind, z));
    h1 = ad::silu(ad::add_channel_bias(lvl1_conv.forward(bind, h1), t1));
    {
        const Tensor& s = h1.val();
        Var seq = xattn1.forward(bind, to_seq(h1), prompt);
        h1 = to_grid(seq, s.dim(0), s.dim(1), s.dim(2));
    }
    Var h2 = ad::silu(lora_conv2d(bind, h1, down, lora_down ? &*lora_down : nullptr));
    h2 = ad::silu(ad::add_channel_bias(lora_conv2d(bind, h2, lvl2_conv, lora_lvl2 ? &*lora_lvl2 : nullptr), t2));
    {
        const Tensor& s = h2.val();
        Var seq = xattn2.forward(bind, to_seq(h2), prompt);
        h2 = to_grid(seq, s.dim(0), s.dim(1), s.dim(2));
    }
    Var up = ad::silu(up_conv.forward(bind, ad::upsample_nearest2x(h2)));
    Var merged = ad::silu(fuse.forward(bind, ad::concat_channels(up, h1)));
    return conv_out.forward(bind, merged);
}

void apply_lora(DenoiserModel& model, ParamStore& ps, const GeneratorConfig& cfg, Rng& rng) {
    const int r = cfg.lora_rank;
    const double s = cfg.lora_scale;
    const int w1 = model.width, w2 = 2 * model.width;
    auto lin = [&](const std::string& name, int din, int dout) {
        return LoraAdapter::create(ps, "lora." + name, din, dout, r, s, rng);
    };
    model.xattn1.lq = lin("xattn1.q", w1, w1);
    model.xattn1.lk = lin("xattn1.k", cfg.prompt_dim, w1);
    model.xattn1.lv = lin("xattn1.v", cfg.prompt_dim, w1);
    model.xattn1.lo = lin("xattn1.o", w1, w1);
    model.xattn2.lq = lin("xattn2.q", w2, w2);
    model.xattn2.lk = lin("xattn2.k", cfg.prompt_dim, w2);
    model.xattn2.lv = lin("xattn2.v", cfg.prompt_dim, w2);
    model.xattn2.lo = lin("xattn2.o", w2, w2);
    // the two widest convolutions, treated as [cout, cin*3*3] matrices
    model.lora_lvl2 = LoraAdapter::create(ps, "lora.lvl2_conv", w2 * 9, w2, r, s, rng);
    model.lora_down = LoraAdapter::create(ps, "lora.down", w1 * 9, w2, r, s, rng);
}

RestoreGraph one_step_restore_from_latent(Binder& bind, Var z_L, const Tensor& prompt, const DenoiserModel& model,
                                          const AutoencoderModel& ae, const GeneratorConfig& cfg,
                                          const NoiseSchedule& sched) {
    cfg.validate(sched.T);
    RestoreGraph g;
    g.z_L = z_L;
    Var p = bind.input(prompt);
    const int t = std::max(1, cfg.T_L);  // T_L=0 degenerates to the identity recovery
    g.eps_hat = model.forward(bind, z_L, p, cfg.T_L);
    if (cfg.T_L == 0) {
        g.z_hat = g.z_L;
    } else {
        g.z_hat = recover_clean(z_L, g.eps_hat, t, sched);
    }
    g.image = ae.decode(bind, g.z_hat);
    return g;
}

RestoreGraph one_step_restore_graph(Binder& bind, Var image_lq, const Tensor& prompt, const DenoiserModel& model,
                                    const AutoencoderModel& ae, const GeneratorConfig& cfg,
                                    const NoiseSchedule& sched) {
    return one_step_restore_from_latent(bind, ae.encode(bind, image_lq), prompt, model, ae, cfg, sched);
}

Tensor one_step_restore(const Tensor& image_lq, const Tensor& prompt, const DenoiserModel& model,
                        const AutoencoderModel& ae, const GeneratorConfig& cfg, const NoiseSchedule& sched,
                        ParamStore& ps) {
    ad::Tape tape;
    Binder bind(tape, ps);
    RestoreGraph g = one_step_restore_graph(bind, bind.input(image_lq), prompt, model, ae, cfg, sched);
    Tensor out = g.image.val();
    for (auto& v : out.data) v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
    return out;
}

}  // namespace osd
