#include <doctest.h>

#include <cmath>

#include "osd/rng.hpp"
#include "osd/schedule.hpp"

using namespace osd;

TEST_CASE("schedule construction invariants") {
    NoiseSchedule s = build_schedule(1000, 8.5e-4, 1.2e-2);
    CHECK(s.T == 1000);
    CHECK(s.beta(1) == doctest::Approx(8.5e-4));
    CHECK(s.beta(1000) == doctest::Approx(1.2e-2));
    double prev = 1.0;
    for (int t = 1; t <= 1000; ++t) {
        CHECK(s.alpha(t) == doctest::Approx(1.0 - s.beta(t)));
        CHECK(s.alpha_bar(t) < prev);   // strictly decreasing
        CHECK(s.alpha_bar(t) > 0.0);
        prev = s.alpha_bar(t);
    }
    CHECK(s.alpha_bar(1) == doctest::Approx(s.alpha(1)));
}

TEST_CASE("forward_diffuse matches the closed form") {
    NoiseSchedule s = build_schedule(100, 1e-3, 2e-2);
    Rng rng(31);
    Tensor z = rng.normal_tensor({2, 3, 3});
    Tensor eps = rng.normal_tensor({2, 3, 3});
    int t = 37;
    Tensor zt = forward_diffuse(z, t, eps, s);
    double a = std::sqrt(s.alpha_bar(t));
    double b = std::sqrt(1.0 - s.alpha_bar(t));
    for (int i = 0; i < z.size(); ++i)
        CHECK(zt.at(static_cast<int>(i)) ==
              doctest::Approx(a * z.at(static_cast<int>(i)) + b * eps.at(static_cast<int>(i))));
}

TEST_CASE("recover_clean inverts forward_diffuse exactly when eps is known") {
    NoiseSchedule s = build_schedule(1000, 8.5e-4, 1.2e-2);
    Rng rng(32);
    for (int trial = 0; trial < 50; ++trial) {
        Tensor z = rng.normal_tensor({4, 4, 4});
        Tensor eps = rng.normal_tensor({4, 4, 4});
        int t = 1 + static_cast<int>(rng.below(1000));
        Tensor z0 = recover_clean(forward_diffuse(z, t, eps, s), eps, t, s);
        for (int i = 0; i < z.size(); ++i) {
            double ref = z.at(static_cast<int>(i));
            double scale = std::max(1.0, std::abs(ref));
            CHECK(std::abs(z0.at(static_cast<int>(i)) - ref) / scale < 1e-9);
        }
    }
}

TEST_CASE("autodiff forward_diffuse and recover_clean agree with tensor versions") {
    NoiseSchedule s = build_schedule(200, 1e-3, 1.5e-2);
    Rng rng(33);
    Tensor z = rng.normal_tensor({2, 4, 4});
    Tensor eps = rng.normal_tensor({2, 4, 4});
    int t = 120;

    ad::Tape tape;
    ad::Var zv = tape.leaf(z);
    ad::Var ev = tape.leaf(eps);
    ad::Var zt = forward_diffuse(zv, t, ev, s);
    Tensor ref = forward_diffuse(z, t, eps, s);
    for (int i = 0; i < ref.size(); ++i)
        CHECK(zt.val().at(static_cast<int>(i)) == doctest::Approx(ref.at(static_cast<int>(i))));

    ad::Var z0 = recover_clean(zt, ev, t, s);
    tape.backward(ad::sum(z0));
    // round trip is the identity, so d sum(z0)/dz is all ones
    for (int i = 0; i < z.size(); ++i)
        CHECK(tape.grad(zv).at(static_cast<int>(i)) == doctest::Approx(1.0));
}

TEST_CASE("t=1 keeps most of the signal, t=T keeps almost none") {
    NoiseSchedule s = build_schedule(1000, 8.5e-4, 1.2e-2);
    CHECK(s.alpha_bar(1) > 0.99);
    CHECK(s.alpha_bar(1000) < 0.01);
}
