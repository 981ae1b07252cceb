#include <doctest.h>

#include <cmath>

#include "osd/degrade.hpp"
#include "osd/faces.hpp"

using namespace osd;

namespace {

Tensor test_face(uint64_t seed = 101) { return make_face(seed, 64).image; }

double image_mse(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (int i = 0; i < a.size(); ++i) {
        double d = a.at(static_cast<int>(i)) - b.at(static_cast<int>(i));
        s += d * d;
    }
    return s / static_cast<double>(a.size());
}

}  // namespace

TEST_CASE("recipe validation rejects inverted and out-of-range bounds") {
    DegradationRecipe r;
    CHECK_NOTHROW(r.validate());
    r.blur_sigma_lo = 5.0;  // lo > hi
    CHECK_THROWS(r.validate());
    r = DegradationRecipe{};
    r.down_factor_lo = 0.5;  // upsampling is not a degradation
    CHECK_THROWS(r.validate());
    r = DegradationRecipe{};
    r.quality_lo = 0;
    CHECK_THROWS(r.validate());
    r = DegradationRecipe{};
    r.stages = 0;
    CHECK_THROWS(r.validate());
}

TEST_CASE("identity recipe leaves the image untouched") {
    DegradationRecipe r;
    r.blur_sigma_lo = r.blur_sigma_hi = 0.0;
    r.down_factor_lo = r.down_factor_hi = 1.0;
    r.noise_sigma_lo = r.noise_sigma_hi = 0.0;
    r.quality_lo = r.quality_hi = 100;
    r.stages = 1;
    r.compress = false;
    r.seed = 5;
    Tensor img = test_face();
    DegradeResult res = degrade(img, r);
    REQUIRE(res.image.size() == img.size());
    for (int i = 0; i < img.size(); ++i)
        CHECK(res.image.at(static_cast<int>(i)) == doctest::Approx(img.at(static_cast<int>(i))).epsilon(1e-12));
}

TEST_CASE("degradation is a pure function of image and recipe") {
    DegradationRecipe r;
    r.seed = 77;
    Tensor img = test_face();
    DegradeResult a = degrade(img, r);
    DegradeResult b = degrade(img, r);
    REQUIRE(a.image.size() == b.image.size());
    for (int i = 0; i < a.image.size(); ++i)
        CHECK(a.image.at(static_cast<int>(i)) == b.image.at(static_cast<int>(i)));
    REQUIRE(a.params.size() == b.params.size());
    for (size_t s = 0; s < a.params.size(); ++s) {
        CHECK(a.params[s].blur_sigma == b.params[s].blur_sigma);
        CHECK(a.params[s].quality == b.params[s].quality);
    }

    DegradationRecipe r2 = r;
    r2.seed = 78;
    DegradeResult c = degrade(img, r2);
    CHECK(image_mse(a.image, c.image) > 0.0);
}

TEST_CASE("degradation records one params entry per stage within recipe bounds") {
    DegradationRecipe r;
    r.stages = 2;
    r.seed = 13;
    DegradeResult res = degrade(test_face(), r);
    REQUIRE(res.params.size() == 2);
    for (const StageParams& p : res.params) {
        CHECK(p.blur_sigma >= r.blur_sigma_lo);
        CHECK(p.blur_sigma <= r.blur_sigma_hi);
        CHECK(p.down_factor >= r.down_factor_lo);
        CHECK(p.down_factor <= r.down_factor_hi);
        CHECK(p.noise_sigma >= r.noise_sigma_lo);
        CHECK(p.noise_sigma <= r.noise_sigma_hi);
        CHECK(p.quality >= r.quality_lo);
        CHECK(p.quality <= r.quality_hi);
    }
}

TEST_CASE("degradation keeps shape, stays in range and actually damages the image") {
    DegradationRecipe r;
    r.blur_sigma_lo = 2.0;
    r.blur_sigma_hi = 3.0;
    r.down_factor_lo = 3.0;
    r.down_factor_hi = 4.0;
    r.seed = 21;
    Tensor img = test_face();
    DegradeResult res = degrade(img, r);
    CHECK(res.image.shape == img.shape);
    CHECK(res.image.min() >= 0.0);
    CHECK(res.image.max() <= 1.0);
    CHECK(image_mse(img, res.image) > 1e-4);
}

TEST_CASE("additive noise magnitude matches the sampled sigma") {
    // flat mid-gray input so blur and resize are identities and only the
    // noise term moves pixels
    Tensor flat({3, 64, 64}, 0.5);
    DegradationRecipe r;
    r.blur_sigma_lo = r.blur_sigma_hi = 0.0;
    r.down_factor_lo = r.down_factor_hi = 1.0;
    r.noise_sigma_lo = r.noise_sigma_hi = 0.1;
    r.compress = false;
    r.stages = 1;
    r.seed = 31;
    DegradeResult res = degrade(flat, r);
    double sd = std::sqrt(image_mse(flat, res.image));
    CHECK(sd > 0.09);
    CHECK(sd < 0.11);
}

TEST_CASE("compression round trip: quality 100 bypasses, low quality distorts") {
    Tensor img = test_face();
    Tensor q100 = compress_roundtrip(img, 100);
    for (int i = 0; i < img.size(); ++i)
        CHECK(q100.at(static_cast<int>(i)) == img.at(static_cast<int>(i)));

    Tensor q30 = compress_roundtrip(img, 30);
    Tensor q80 = compress_roundtrip(img, 80);
    double e30 = image_mse(img, q30);
    double e80 = image_mse(img, q80);
    CHECK(e30 > 0.0);
    CHECK(e30 > e80);  // harsher quantization, larger error
}

TEST_CASE("gaussian blur preserves the mean and reduces variance") {
    Tensor img = test_face();
    Tensor blurred = gaussian_blur(img, 2.0);
    CHECK(blurred.mean() == doctest::Approx(img.mean()).epsilon(1e-2));
    auto variance = [](const Tensor& t) {
        double m = t.mean(), s = 0.0;
        for (double v : t.data) s += (v - m) * (v - m);
        return s / static_cast<double>(t.size());
    };
    CHECK(variance(blurred) < variance(img));
    // sigma 0 is the identity
    Tensor same = gaussian_blur(img, 0.0);
    for (int i = 0; i < img.size(); ++i)
        CHECK(same.at(static_cast<int>(i)) == img.at(static_cast<int>(i)));
}

TEST_CASE("bilinear resize round trip at identical size is the identity") {
    Tensor img = test_face();
    Tensor same = resize_bilinear(img, 64, 64);
    for (int i = 0; i < img.size(); ++i)
        CHECK(same.at(static_cast<int>(i)) == doctest::Approx(img.at(static_cast<int>(i))).epsilon(1e-12));

    Tensor small = resize_bilinear(img, 16, 16);
    CHECK(small.shape == std::vector<int>{3, 16, 16});
    Tensor back = resize_bilinear(small, 64, 64);
    CHECK(back.shape == img.shape);
}
