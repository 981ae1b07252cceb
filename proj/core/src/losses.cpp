#include "osd/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace osd {

using ad::Var;

void LossWeights::validate() const {
    if (lambda_dis < 0 || lambda_id < 0 || lambda_per < 0 || !std::isfinite(lambda_dis + lambda_id + lambda_per))
        throw std::invalid_argument("LossWeights: weights must be finite and non-negative");
}

Var identity_loss(Binder& bind, Var img_a, Var img_b, const FaceEmbedder& face) {
    Var ea = face.embed(bind, img_a);
    Var eb = face.embed(bind, img_b);
    Var cos = ad::sum(ad::mul(ea, eb));
    return ad::affine(cos, -1.0, 1.0);
}

double identity_loss(const Tensor& img_a, const Tensor& img_b, const FaceEmbedder& face, ParamStore& ps) {
    ad::Tape tape;
    Binder bind(tape, ps);
    return identity_loss(bind, bind.input(img_a), bind.input(img_b), face).val().data[0];
}

Var sobel(Var image) {
    const Tensor& v = image.val();
    if (v.rank() != 3) throw std::invalid_argument("sobel: expected [C,H,W]");
    const int C = v.dim(0);
    // depthwise 3x3 kernels realized as block-diagonal dense conv weights
    const double kx[9] = {-1, 0, 1, -2, 0, 2, -1, 0, 1};
    const double ky[9] = {-1, -2, -1, 0, 0, 0, 1, 2, 1};
    Tensor wx({C, C, 3, 3}), wy({C, C, 3, 3});
    for (int c = 0; c < C; ++c)
        for (int i = 0; i < 9; ++i) {
            wx.data[((static_cast<size_t>(c) * C + c) * 9) + i] = kx[i];
            wy.data[((static_cast<size_t>(c) * C + c) * 9) + i] = ky[i];
        }
    ad::Tape& t = *image.tape;
    Var padded = ad::pad_replicate1(image);
    Var zero_bias = t.leaf(Tensor({C}, 0.0));
    Var gx = ad::conv2d(padded, t.leaf(wx), zero_bias, 1, 0);
    Var gy = ad::conv2d(padded, t.leaf(wy), zero_bias, 1, 0);
    // small eps keeps the sqrt differentiable on flat regions
    return ad::sqrt_(ad::affine(ad::add(ad::square(gx), ad::square(gy)), 1.0, 1e-24));
}

Tensor sobel(const Tensor& image) {
    ad::Tape tape;
    return sobel(tape.leaf(image)).val();
}

namespace {

// per-stage DISTS terms; weights uniform over all channels of all stages
struct StageStats {
    Var structure, texture;  // [C] each
};

StageStats stage_stats(Var fx, Var fy) {
    const double c1 = 1e-6, c2 = 1e-6;
    Var mx = ad::channel_mean(fx);
    Var my = ad::channel_mean(fy);
    Var exx = ad::channel_mean(ad::mul(fx, fx));
    Var eyy = ad::channel_mean(ad::mul(fy, fy));
    Var exy = ad::channel_mean(ad::mul(fx, fy));
    Var vx = ad::sub(exx, ad::mul(mx, mx));
    Var vy = ad::sub(eyy, ad::mul(my, my));
    Var cxy = ad::sub(exy, ad::mul(mx, my));
    StageStats s;
    s.structure = ad::mul(ad::affine(ad::mul(mx, my), 2.0, c1),
                          ad::pow_const(ad::affine(ad::add(ad::mul(mx, mx), ad::mul(my, my)), 1.0, c1), -1.0));
    s.texture = ad::mul(ad::affine(cxy, 2.0, c2), ad::pow_const(ad::affine(ad::add(vx, vy), 1.0, c2), -1.0));
    return s;
}

}  // namespace

Var dists(Binder& bind, Var x, Var y, const FeatureExtractor& feat) {
    if (x.val().shape != y.val().shape) throw std::invalid_argument("dists: shape mismatch");
    auto sx = feat.stages(bind, x);
    auto sy = feat.stages(bind, y);
    int total_channels = 0;
    for (auto& s : sx) total_channels += s.val().dim(0);
    Var acc;
    for (size_t i = 0; i < sx.size(); ++i) {
        StageStats st = stage_stats(sx[i], sy[i]);
        Var stage_sum = ad::add(ad::sum(st.structure), ad::sum(st.texture));
        acc = (i == 0) ? stage_sum : ad::add(acc, stage_sum);
    }
    // similarity averaged with uniform weights summing to 1
    Var sim = ad::affine(acc, 1.0 / (2.0 * total_channels), 0.0);
    return ad::affine(sim, -1.0, 1.0);
}

double dists(const Tensor& x, const Tensor& y, const FeatureExtractor& feat, ParamStore& ps) {
    ad::Tape tape;
    Binder bind(tape, ps);
    return dists(bind, bind.input(x), bind.input(y), feat).val().data[0];
}

Var ea_dists(Binder& bind, Var x, Var y, const FeatureExtractor& feat) {
    Var image_term = dists(bind, x, y, feat);
    Var edge_term = dists(bind, sobel(x), sobel(y), feat);
    return ad::add(image_term, edge_term);
}

double ea_dists(const Tensor& x, const Tensor& y, const FeatureExtractor& feat, ParamStore& ps) {
    ad::Tape tape;
    Binder bind(tape, ps);
    return ea_dists(bind, bind.input(x), bind.input(y), feat).val().data[0];
}

Var gan_generator_loss(Binder& bind, Var z_hat, const LatentDiscriminator& disc, const NoiseSchedule& sched, Rng& rng,
                       int num_draws) {
    Var acc;
    for (int i = 0; i < num_draws; ++i) {
        const int t = static_cast<int>(rng.below(sched.T)) + 1;
        Var eps = bind.input(rng.normal_tensor(z_hat.val().shape));
        Var noised = forward_diffuse(z_hat, t, eps, sched);
        Var term = ad::neg(ad::log_(disc.prob(bind, noised, t)));
        acc = (i == 0) ? term : ad::add(acc, term);
    }
    return ad::affine(acc, 1.0 / num_draws, 0.0);
}

Var gan_discriminator_loss(Binder& bind, Var z_real, Var z_fake, const LatentDiscriminator& disc,
                           const NoiseSchedule& sched, Rng& rng, int num_draws) {
    if (z_real.val().shape != z_fake.val().shape) throw std::invalid_argument("gan_discriminator_loss: shape mismatch");
    // the discriminator objective must not push gradients into the generator
    Var zr = ad::stopgrad(z_real);
    Var zf = ad::stopgrad(z_fake);
    Var acc;
    for (int i = 0; i < num_draws; ++i) {
        const int t = static_cast<int>(rng.below(sched.T)) + 1;  // shared t, independent eps
        Var eps_f = bind.input(rng.normal_tensor(zf.val().shape));
        Var eps_r = bind.input(rng.normal_tensor(zr.val().shape));
        Var p_fake = disc.prob(bind, forward_diffuse(zf, t, eps_f, sched), t);
        Var p_real = disc.prob(bind, forward_diffuse(zr, t, eps_r, sched), t);
        Var term = ad::sub(ad::neg(ad::log_(ad::affine(ad::neg(p_fake), 1.0, 1.0))), ad::log_(p_real));
        acc = (i == 0) ? term : ad::add(acc, term);
    }
    return ad::affine(acc, 1.0 / num_draws, 0.0);
}

LossReport GeneratorLossGraph::report() const {
    LossReport r;
    r.set("total", total.val().data[0]);
    r.set("gan", gan.val().data[0]);
    r.set("id", id.val().data[0]);
    r.set("ea_dists", ea.val().data[0]);
    r.set("mse", mse.val().data[0]);
    return r;
}

GeneratorLossGraph generator_total(Binder& bind, Var img_target, Var img_hat, Var z_target, Var z_hat,
                                   const LossWeights& w, const FaceEmbedder& face, const FeatureExtractor& feat,
                                   const LatentDiscriminator& disc, const NoiseSchedule& sched, Rng& rng) {
    w.validate();
    (void)z_target;  // the real latent enters only the discriminator objective
    GeneratorLossGraph g;
    g.gan = gan_generator_loss(bind, z_hat, disc, sched, rng);
    g.id = identity_loss(bind, img_target, img_hat, face);
    g.ea = ea_dists(bind, img_target, img_hat, feat);
    g.mse = ad::mse(img_target, img_hat);
    Var total = ad::axpy(g.mse, g.gan, w.lambda_dis);
    total = ad::axpy(total, g.id, w.lambda_id);
    g.total = ad::axpy(total, g.ea, w.lambda_per);
    return g;
}

}  // namespace osd
