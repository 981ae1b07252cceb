#pragma once

#include "osd/features.hpp"
#include "osd/report.hpp"
#include "osd/schedule.hpp"

namespace osd {

struct LossWeights {
    double lambda_dis = 0.1;
    double lambda_id = 0.5;
    double lambda_per = 1.0;

    void validate() const;
};

// 1 - cos(F(a), F(b)); value in [0, 2]
ad::Var identity_loss(Binder& bind, ad::Var img_a, ad::Var img_b, const FaceEmbedder& face);
double identity_loss(const Tensor& img_a, const Tensor& img_b, const FaceEmbedder& face, ParamStore& ps);

// per-channel gradient magnitude with the standard 3x3 kernels,
// replicate padding
ad::Var sobel(ad::Var image);
Tensor sobel(const Tensor& image);

// DISTS with uniform stage/channel weights over the extractor pyramid
// (stage 0 = the image itself)
ad::Var dists(Binder& bind, ad::Var x, ad::Var y, const FeatureExtractor& feat);
double dists(const Tensor& x, const Tensor& y, const FeatureExtractor& feat, ParamStore& ps);

// DISTS(x,y) + DISTS(S(x), S(y))
ad::Var ea_dists(Binder& bind, ad::Var x, ad::Var y, const FeatureExtractor& feat);
double ea_dists(const Tensor& x, const Tensor& y, const FeatureExtractor& feat, ParamStore& ps);

// -mean_t log D(forward_diffuse(z_hat, t, eps)); draws supplied by rng
ad::Var gan_generator_loss(Binder& bind, ad::Var z_hat, const LatentDiscriminator& disc, const NoiseSchedule& sched,
                           Rng& rng, int num_draws = 1);

// -mean log(1 - D(F(z_hat,t))) - mean log D(F(z_H,t)); shared t,
// independent eps per term
ad::Var gan_discriminator_loss(Binder& bind, ad::Var z_real, ad::Var z_fake, const LatentDiscriminator& disc,
                               const NoiseSchedule& sched, Rng& rng, int num_draws = 1);

struct GeneratorLossGraph {
    ad::Var total, gan, id, ea, mse;
    LossReport report() const;
};

// lambda_dis*L_G + lambda_id*L_ID + lambda_per*L_EA-DISTS + MSE
GeneratorLossGraph generator_total(Binder& bind, ad::Var img_target, ad::Var img_hat, ad::Var z_target, ad::Var z_hat,
                                   const LossWeights& w, const FaceEmbedder& face, const FeatureExtractor& feat,
                                   const LatentDiscriminator& disc, const NoiseSchedule& sched, Rng& rng);

}  // namespace osd
