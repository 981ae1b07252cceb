#pragma once

#include <cstdint>
#include <vector>

#include "osd/rng.hpp"
#include "osd/tensor.hpp"

namespace osd {

// Sampled-per-image degradation parameters; recorded in sidecars so every
// LQ file is reproducible.
struct StageParams {
    double blur_sigma = 0.0;
    double down_factor = 1.0;
    double noise_sigma = 0.0;
    int quality = 100;
};

struct DegradationRecipe {
    double blur_sigma_lo = 0.1, blur_sigma_hi = 3.0;
    double down_factor_lo = 1.0, down_factor_hi = 4.0;
    double noise_sigma_lo = 0.0, noise_sigma_hi = 0.1;
    int quality_lo = 30, quality_hi = 95;
    int stages = 2;
    bool compress = true;
    uint64_t seed = 0;

    void validate() const;
};

struct DegradeResult {
    Tensor image;
    std::vector<StageParams> params;
};

// Two sequential blur -> downsample -> noise -> compress passes, final
// resize back to the source resolution. Pure function of (image, recipe).
DegradeResult degrade(const Tensor& image_hq, const DegradationRecipe& recipe);

// Block-DCT (8x8) quantize/dequantize round trip; quality 100 bypasses
// quantization entirely.
Tensor compress_roundtrip(const Tensor& image, int quality);

// shared spatial helpers
Tensor gaussian_blur(const Tensor& image, double sigma);
Tensor resize_bilinear(const Tensor& image, int out_h, int out_w);

}  // namespace osd
