#pragma once

#include <memory>
#include <vector>

#include "osd/nn.hpp"

namespace osd {

// Pluggable multi-stage feature extractor (perceptual losses, DISTS, FID
// features). The desk default is a fixed seeded conv pyramid; externally
// trained weights can be loaded into the same parameter slots.
class FeatureExtractor {
public:
    virtual ~FeatureExtractor() = default;
    // stage feature maps for an image [3,H,W]; stage 0 is the image itself
    virtual std::vector<ad::Var> stages(Binder& bind, ad::Var image) const = 0;
    // pooled final-stage feature vector (FID source)
    virtual Tensor pooled(ParamStore& ps, const Tensor& image) const = 0;
    virtual int pooled_dim() const = 0;
};

// Three strided conv stages with frozen seeded weights, widths 16/32/64.
class SeededPyramidExtractor : public FeatureExtractor {
public:
    SeededPyramidExtractor(ParamStore& ps, const std::string& prefix, uint64_t seed);

    std::vector<ad::Var> stages(Binder& bind, ad::Var image) const override;
    Tensor pooled(ParamStore& ps, const Tensor& image) const override;
    int pooled_dim() const override { return 64; }

private:
    Conv2dLayer c1_, c2_, c3_;
};

// Patch-based discriminator over images: strided convs to a logit map,
// sigmoid per patch, mean-pooled to one probability.
struct PatchDiscriminator {
    Conv2dLayer c1, c2, c3, head;

    static PatchDiscriminator create(ParamStore& ps, const std::string& prefix, Rng& rng);
    // scalar probability in (0,1)
    ad::Var prob(Binder& bind, ad::Var image) const;
};

// Face-recognition embedder stand-in: conv stack, global pooling, linear
// head, L2-normalized output of dim m.
class FaceEmbedder {
public:
    FaceEmbedder(ParamStore& ps, const std::string& prefix, int m, uint64_t seed);

    ad::Var embed(Binder& bind, ad::Var image) const;  // [1, m], unit norm
    Tensor embed(ParamStore& ps, const Tensor& image) const;
    int dim() const { return m_; }

private:
    Conv2dLayer c1_, c2_, c3_, c4_;
    LinearLayer head_;
    int m_;
};

// Discriminator over (latent, timestep): conv stack with a timestep
// embedding bias, sigmoid probability clamped away from {0,1}.
struct LatentDiscriminator {
    Conv2dLayer c1, c2, head;
    LinearLayer temb;
    double clamp_eps = 1e-6;

    static LatentDiscriminator create(ParamStore& ps, const std::string& prefix, int latent_c, Rng& rng);
    ad::Var prob(Binder& bind, ad::Var z, int t) const;  // scalar in (0,1)
};

}  // namespace osd
