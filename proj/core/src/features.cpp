#include "osd/features.hpp"

#include "osd/generator.hpp"

namespace osd {

using ad::Var;

SeededPyramidExtractor::SeededPyramidExtractor(ParamStore& ps, const std::string& prefix, uint64_t seed) {
    Rng rng(seed);
    c1_ = Conv2dLayer::create(ps, prefix + ".c1", 3, 16, 3, 2, 1, rng);
    c2_ = Conv2dLayer::create(ps, prefix + ".c2", 16, 32, 3, 2, 1, rng);
    c3_ = Conv2dLayer::create(ps, prefix + ".c3", 32, 64, 3, 2, 1, rng);
    ps.set_trainable_prefix(prefix, false);
}

std::vector<Var> SeededPyramidExtractor::stages(Binder& bind, Var image) const {
    std::vector<Var> out;
    out.push_back(image);
    Var h = ad::leaky_relu(c1_.forward(bind, image), 0.2);
    out.push_back(h);
    h = ad::leaky_relu(c2_.forward(bind, h), 0.2);
    out.push_back(h);
    h = ad::leaky_relu(c3_.forward(bind, h), 0.2);
    out.push_back(h);
    return out;
}

Tensor SeededPyramidExtractor::pooled(ParamStore& ps, const Tensor& image) const {
    ad::Tape tape;
    Binder bind(tape, ps);
    auto st = stages(bind, bind.input(image));
    return ad::channel_mean(st.back()).val();
}

PatchDiscriminator PatchDiscriminator::create(ParamStore& ps, const std::string& prefix, Rng& rng) {
    PatchDiscriminator d;
    d.c1 = Conv2dLayer::create(ps, prefix + ".c1", 3, 16, 3, 2, 1, rng);
    d.c2 = Conv2dLayer::create(ps, prefix + ".c2", 16, 32, 3, 2, 1, rng);
    d.c3 = Conv2dLayer::create(ps, prefix + ".c3", 32, 32, 3, 2, 1, rng);
    d.head = Conv2dLayer::create(ps, prefix + ".head", 32, 1, 3, 1, 1, rng);
    return d;
}

Var PatchDiscriminator::prob(Binder& bind, Var image) const {
    Var h = ad::leaky_relu(c1.forward(bind, image), 0.2);
    h = ad::leaky_relu(c2.forward(bind, h), 0.2);
    h = ad::leaky_relu(c3.forward(bind, h), 0.2);
    Var patch_probs = ad::sigmoid(head.forward(bind, h));
    return ad::mean(patch_probs);
}

FaceEmbedder::FaceEmbedder(ParamStore& ps, const std::string& prefix, int m, uint64_t seed) : m_(m) {
    Rng rng(seed);
    c1_ = Conv2dLayer::create(ps, prefix + ".c1", 3, 16, 3, 2, 1, rng);
    c2_ = Conv2dLayer::create(ps, prefix + ".c2", 16, 32, 3, 2, 1, rng);
    c3_ = Conv2dLayer::create(ps, prefix + ".c3", 32, 64, 3, 2, 1, rng);
    c4_ = Conv2dLayer::create(ps, prefix + ".c4", 64, 64, 3, 2, 1, rng);
    head_ = LinearLayer::create(ps, prefix + ".head", 64, m, rng);
    ps.set_trainable_prefix(prefix, false);
}

Var FaceEmbedder::embed(Binder& bind, Var image) const {
    Var h = ad::leaky_relu(c1_.forward(bind, image), 0.2);
    h = ad::leaky_relu(c2_.forward(bind, h), 0.2);
    h = ad::leaky_relu(c3_.forward(bind, h), 0.2);
    h = ad::leaky_relu(c4_.forward(bind, h), 0.2);
    Var v = ad::reshape(ad::channel_mean(h), {1, 64});
    Var e = head_.forward(bind, v);
    Var inv_norm = ad::pow_const(ad::affine(ad::row_sumsq(e), 1.0, 1e-24), -0.5);
    return ad::rows_scale(e, inv_norm);
}

Tensor FaceEmbedder::embed(ParamStore& ps, const Tensor& image) const {
    ad::Tape tape;
    Binder bind(tape, ps);
    return embed(bind, bind.input(image)).val().reshaped({m_});
}

LatentDiscriminator LatentDiscriminator::create(ParamStore& ps, const std::string& prefix, int latent_c, Rng& rng) {
    LatentDiscriminator d;
    d.c1 = Conv2dLayer::create(ps, prefix + ".c1", latent_c, 32, 3, 2, 1, rng);
    d.c2 = Conv2dLayer::create(ps, prefix + ".c2", 32, 64, 3, 2, 1, rng);
    d.head = Conv2dLayer::create(ps, prefix + ".head", 64, 1, 3, 1, 1, rng);
    d.temb = LinearLayer::create(ps, prefix + ".temb", 32, 32, rng);
    return d;
}

Var LatentDiscriminator::prob(Binder& bind, Var z, int t) const {
    Var h = ad::leaky_relu(c1.forward(bind, z), 0.2);
    Var te = bind.input(timestep_embedding(t, 32).reshaped({1, 32}));
    Var bias = ad::reshape(ad::silu(temb.forward(bind, te)), {32});
    h = ad::add_channel_bias(h, bias);
    h = ad::leaky_relu(c2.forward(bind, h), 0.2);
    Var p = ad::mean(ad::sigmoid(head.forward(bind, h)));
    return ad::clamp_(p, clamp_eps, 1.0 - clamp_eps);
}

}  // namespace osd
