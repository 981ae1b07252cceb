#include "osd/degrade.hpp"

#include <cmath>
#include <stdexcept>

namespace osd {

namespace {

void check_image(const Tensor& im, const char* op) {
    if (im.rank() != 3 || im.dim(0) != 3) throw std::invalid_argument(std::string(op) + ": expected [3,H,W] image");
}

double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

// standard JPEG luminance quantization table
const int kQuantTable[64] = {
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};

void dct8(const double in[8], double out[8]) {
    for (int k = 0; k < 8; ++k) {
        const double scale = (k == 0) ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
        double s = 0;
        for (int n = 0; n < 8; ++n) s += in[n] * std::cos(M_PI * (n + 0.5) * k / 8.0);
        out[k] = scale * s;
    }
}

void idct8(const double in[8], double out[8]) {
    for (int n = 0; n < 8; ++n) {
        double s = 0;
        for (int k = 0; k < 8; ++k) {
            const double scale = (k == 0) ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
            s += scale * in[k] * std::cos(M_PI * (n + 0.5) * k / 8.0);
        }
        out[n] = s;
    }
}

void dct2d(double block[64], bool inverse) {
    double tmp[64], line_in[8], line_out[8];
    for (int r = 0; r < 8; ++r) {
        for (int i = 0; i < 8; ++i) line_in[i] = block[r * 8 + i];
        inverse ? idct8(line_in, line_out) : dct8(line_in, line_out);
        for (int i = 0; i < 8; ++i) tmp[r * 8 + i] = line_out[i];
    }
    for (int c = 0; c < 8; ++c) {
        for (int i = 0; i < 8; ++i) line_in[i] = tmp[i * 8 + c];
        inverse ? idct8(line_in, line_out) : dct8(line_in, line_out);
        for (int i = 0; i < 8; ++i) block[i * 8 + c] = line_out[i];
    }
}

}  // namespace

void DegradationRecipe::validate() const {
    auto range_ok = [](double lo, double hi) { return lo <= hi; };
    if (!range_ok(blur_sigma_lo, blur_sigma_hi) || !range_ok(down_factor_lo, down_factor_hi) ||
        !range_ok(noise_sigma_lo, noise_sigma_hi) || quality_lo > quality_hi)
        throw std::invalid_argument("DegradationRecipe: every range needs low <= high");
    if (blur_sigma_lo < 0 || down_factor_lo < 1.0 || noise_sigma_lo < 0)
        throw std::invalid_argument("DegradationRecipe: negative or sub-unit range bound");
    if (quality_lo < 1 || quality_hi > 100) throw std::invalid_argument("DegradationRecipe: quality must be in [1,100]");
    if (stages < 1) throw std::invalid_argument("DegradationRecipe: stages must be >= 1");
}

Tensor gaussian_blur(const Tensor& image, double sigma) {
    check_image(image, "gaussian_blur");
    if (sigma <= 0.0) return image;
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(static_cast<size_t>(2 * radius + 1));
    double ksum = 0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[static_cast<size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
        ksum += kernel[static_cast<size_t>(i + radius)];
    }
    for (auto& k : kernel) k /= ksum;

    const int H = image.dim(1), W = image.dim(2);
    auto clampi = [](int v, int hi) { return v < 0 ? 0 : (v > hi ? hi : v); };
    Tensor tmp(image.shape), out(image.shape);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                double s = 0;
                for (int i = -radius; i <= radius; ++i)
                    s += kernel[static_cast<size_t>(i + radius)] * image.at(c, y, clampi(x + i, W - 1));
                tmp.at(c, y, x) = s;
            }
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                double s = 0;
                for (int i = -radius; i <= radius; ++i)
                    s += kernel[static_cast<size_t>(i + radius)] * tmp.at(c, clampi(y + i, H - 1), x);
                out.at(c, y, x) = s;
            }
    return out;
}

Tensor resize_bilinear(const Tensor& image, int out_h, int out_w) {
    check_image(image, "resize_bilinear");
    const int H = image.dim(1), W = image.dim(2);
    if (out_h == H && out_w == W) return image;
    Tensor out({3, out_h, out_w});
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < out_h; ++y)
            for (int x = 0; x < out_w; ++x) {
                const double sy = (y + 0.5) * H / out_h - 0.5;
                const double sx = (x + 0.5) * W / out_w - 0.5;
                const int y0 = static_cast<int>(std::floor(sy)), x0 = static_cast<int>(std::floor(sx));
                const double fy = sy - y0, fx = sx - x0;
                auto px = [&](int yy, int xx) {
                    yy = yy < 0 ? 0 : (yy >= H ? H - 1 : yy);
                    xx = xx < 0 ? 0 : (xx >= W ? W - 1 : xx);
                    return image.at(c, yy, xx);
                };
                out.at(c, y, x) = (1 - fy) * ((1 - fx) * px(y0, x0) + fx * px(y0, x0 + 1)) +
                                  fy * ((1 - fx) * px(y0 + 1, x0) + fx * px(y0 + 1, x0 + 1));
            }
    return out;
}

Tensor compress_roundtrip(const Tensor& image, int quality) {
    check_image(image, "compress_roundtrip");
    if (quality < 1 || quality > 100) throw std::invalid_argument("compress_roundtrip: quality must be in [1,100]");
    if (quality == 100) return image;

    const int scale = (quality < 50) ? 5000 / quality : 200 - 2 * quality;
    double q[64];
    for (int i = 0; i < 64; ++i) {
        int v = (kQuantTable[i] * scale + 50) / 100;
        q[i] = static_cast<double>(v < 1 ? 1 : (v > 255 ? 255 : v));
    }

    const int H = image.dim(1), W = image.dim(2);
    Tensor out(image.shape);
    double block[64];
    for (int c = 0; c < 3; ++c)
        for (int by = 0; by < H; by += 8)
            for (int bx = 0; bx < W; bx += 8) {
                for (int y = 0; y < 8; ++y)
                    for (int x = 0; x < 8; ++x) {
                        // replicate past the border so partial blocks stay smooth
                        const int sy = std::min(by + y, H - 1), sx = std::min(bx + x, W - 1);
                        block[y * 8 + x] = image.at(c, sy, sx) * 255.0 - 128.0;
                    }
                dct2d(block, false);
                for (int i = 0; i < 64; ++i) block[i] = std::round(block[i] / q[i]) * q[i];
                dct2d(block, true);
                for (int y = 0; y < 8 && by + y < H; ++y)
                    for (int x = 0; x < 8 && bx + x < W; ++x)
                        out.at(c, by + y, bx + x) = clamp01((block[y * 8 + x] + 128.0) / 255.0);
            }
    return out;
}

DegradeResult degrade(const Tensor& image_hq, const DegradationRecipe& recipe) {
    check_image(image_hq, "degrade");
    recipe.validate();
    if (image_hq.min() < 0.0 || image_hq.max() > 1.0) throw std::invalid_argument("degrade: input must lie in [0,1]");

    Rng rng(recipe.seed);
    const int H = image_hq.dim(1), W = image_hq.dim(2);
    DegradeResult result;
    Tensor cur = image_hq;

    for (int s = 0; s < recipe.stages; ++s) {
        StageParams p;
        p.blur_sigma = rng.uniform(recipe.blur_sigma_lo, recipe.blur_sigma_hi);
        p.down_factor = rng.uniform(recipe.down_factor_lo, recipe.down_factor_hi);
        p.noise_sigma = rng.uniform(recipe.noise_sigma_lo, recipe.noise_sigma_hi);
        p.quality = recipe.quality_lo + static_cast<int>(rng.below(recipe.quality_hi - recipe.quality_lo + 1));

        cur = gaussian_blur(cur, p.blur_sigma);
        if (p.down_factor > 1.0) {
            const int h2 = std::max(8, static_cast<int>(std::lround(cur.dim(1) / p.down_factor)));
            const int w2 = std::max(8, static_cast<int>(std::lround(cur.dim(2) / p.down_factor)));
            cur = resize_bilinear(cur, h2, w2);
        }
        if (p.noise_sigma > 0.0) {
            for (auto& v : cur.data) v = clamp01(v + p.noise_sigma * rng.normal());
        }
        if (recipe.compress) cur = compress_roundtrip(cur, p.quality);
        result.params.push_back(p);
    }

    cur = resize_bilinear(cur, H, W);
    for (auto& v : cur.data) v = clamp01(v);
    result.image = std::move(cur);
    return result;
}

}  // namespace osd
