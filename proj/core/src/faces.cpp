#include "osd/faces.hpp"

#include <cmath>

namespace osd {

namespace {

struct Color {
    double r, g, b;
};

void fill_ellipse(Tensor& img, double cx, double cy, double rx, double ry, const Color& col, double softness = 1.0) {
    const int H = img.dim(1), W = img.dim(2);
    const int y0 = std::max(0, static_cast<int>(cy - ry - 2)), y1 = std::min(H - 1, static_cast<int>(cy + ry + 2));
    const int x0 = std::max(0, static_cast<int>(cx - rx - 2)), x1 = std::min(W - 1, static_cast<int>(cx + rx + 2));
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            const double d = std::pow((x - cx) / rx, 2) + std::pow((y - cy) / ry, 2);
            // soft edge: alpha fades across roughly one pixel
            const double alpha = 1.0 / (1.0 + std::exp((d - 1.0) * 6.0 * softness * std::min(rx, ry)));
            if (alpha < 1e-3) continue;
            img.at(0, y, x) = (1 - alpha) * img.at(0, y, x) + alpha * col.r;
            img.at(1, y, x) = (1 - alpha) * img.at(1, y, x) + alpha * col.g;
            img.at(2, y, x) = (1 - alpha) * img.at(2, y, x) + alpha * col.b;
        }
}

}  // namespace

ProceduralFace make_face(uint64_t seed, int size) {
    Rng rng(seed);
    const double S = static_cast<double>(size);
    ProceduralFace out;
    out.image = Tensor({3, size, size});
    Tensor& img = out.image;

    // vertical gradient background
    const Color top{rng.uniform(0.1, 0.5), rng.uniform(0.2, 0.6), rng.uniform(0.4, 0.9)};
    const Color bot{rng.uniform(0.0, 0.3), rng.uniform(0.1, 0.4), rng.uniform(0.2, 0.5)};
    for (int y = 0; y < size; ++y) {
        const double f = static_cast<double>(y) / (size - 1);
        for (int x = 0; x < size; ++x) {
            img.at(0, y, x) = top.r + f * (bot.r - top.r);
            img.at(1, y, x) = top.g + f * (bot.g - top.g);
            img.at(2, y, x) = top.b + f * (bot.b - top.b);
        }
    }

    const double cx = S * 0.5 + rng.uniform(-0.04, 0.04) * S;
    const double cy = S * 0.52 + rng.uniform(-0.04, 0.04) * S;
    const double head_rx = S * rng.uniform(0.26, 0.34);
    const double head_ry = S * rng.uniform(0.32, 0.42);
    const double skin_base = rng.uniform(0.55, 0.9);
    const Color skin{skin_base, skin_base * rng.uniform(0.75, 0.9), skin_base * rng.uniform(0.55, 0.75)};
    fill_ellipse(img, cx, cy, head_rx, head_ry, skin);

    // hair cap
    const Color hair{rng.uniform(0.05, 0.4), rng.uniform(0.03, 0.3), rng.uniform(0.02, 0.25)};
    fill_ellipse(img, cx, cy - head_ry * 0.75, head_rx * 0.95, head_ry * 0.45, hair);

    const double eye_dx = head_rx * rng.uniform(0.38, 0.5);
    const double eye_y = cy - head_ry * rng.uniform(0.12, 0.22);
    const double eye_r = S * rng.uniform(0.03, 0.05);
    const Color sclera{0.95, 0.95, 0.93};
    const Color iris{rng.uniform(0.05, 0.45), rng.uniform(0.1, 0.5), rng.uniform(0.15, 0.65)};
    for (int side : {-1, 1}) {
        const double ex = cx + side * eye_dx;
        fill_ellipse(img, ex, eye_y, eye_r * 1.5, eye_r, sclera);
        fill_ellipse(img, ex, eye_y, eye_r * 0.65, eye_r * 0.65, iris);
        // eyebrow
        const Color brow{hair.r * 0.8, hair.g * 0.8, hair.b * 0.8};
        fill_ellipse(img, ex, eye_y - eye_r * 2.2, eye_r * 1.8, eye_r * 0.45, brow);
    }

    // nose hint
    fill_ellipse(img, cx, cy + head_ry * 0.08, eye_r * 0.5, eye_r * 1.1,
                 Color{skin.r * 0.85, skin.g * 0.85, skin.b * 0.85});

    const double mouth_y = cy + head_ry * rng.uniform(0.42, 0.55);
    const double mouth_rx = head_rx * rng.uniform(0.32, 0.45);
    const double mouth_ry = S * rng.uniform(0.015, 0.035);
    fill_ellipse(img, cx, mouth_y, mouth_rx, mouth_ry, Color{rng.uniform(0.5, 0.8), 0.15, 0.2});

    for (auto& v : img.data) v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);

    out.landmarks.points = {{cx - eye_dx, eye_y},
                            {cx + eye_dx, eye_y},
                            {cx, mouth_y},
                            {cx - mouth_rx, mouth_y},
                            {cx + mouth_rx, mouth_y}};
    return out;
}

std::vector<ProceduralFace> make_face_dataset(uint64_t base_seed, int count, int size) {
    std::vector<ProceduralFace> out;
    out.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) out.push_back(make_face(Rng::derive(base_seed, static_cast<uint64_t>(i)).next_u64(), size));
    return out;
}

}  // namespace osd
