#include <doctest.h>

#include <cmath>

#include "osd/lora.hpp"
#include "osd/nn.hpp"

using namespace osd;

TEST_CASE("param store create, lookup and prefix queries") {
    ParamStore ps;
    ps.create("a.w", Tensor({2, 2}, 1.0));
    ps.create("a.b", Tensor({2}, 0.0));
    ps.create("b.w", Tensor({3}, 2.0), false);

    CHECK(ps.has("a.w"));
    CHECK_FALSE(ps.has("missing"));
    CHECK_FALSE(ps.at("b.w").trainable);
    CHECK(ps.names_with_prefix("a.").size() == 2);
    CHECK(ps.names().size() == 3);

    ps.set_trainable_prefix("a.", false);
    CHECK_FALSE(ps.at("a.w").trainable);

    uint64_t h1 = ps.hash_prefix("a.");
    ps.value("a.w").at(0) = 9.0;
    CHECK(ps.hash_prefix("a.") != h1);
}

TEST_CASE("binder binds each parameter once and harvest accumulates grads") {
    ParamStore ps;
    ps.create("w", Tensor({3}, {1.0, 2.0, 3.0}));
    ad::Tape tape;
    Binder bind(tape, ps);
    ad::Var w1 = bind("w");
    ad::Var w2 = bind("w");
    CHECK(w1.id == w2.id);  // same leaf reused

    ad::Var loss = ad::sum(ad::square(w1));
    tape.backward(loss);
    bind.harvest();
    for (int i = 0; i < 3; ++i)
        CHECK(ps.at("w").grad.at(i) == doctest::Approx(2.0 * ps.value("w").at(i)));

    // second harvest-equivalent pass accumulates
    ad::Tape tape2;
    Binder bind2(tape2, ps);
    tape2.backward(ad::sum(bind2("w")));
    bind2.harvest();
    CHECK(ps.at("w").grad.at(0) == doctest::Approx(2.0 * 1.0 + 1.0));

    ps.zero_grads();
    CHECK(ps.at("w").grad.at(0) == doctest::Approx(0.0));
}

TEST_CASE("adam optimizer takes a gradient descent step") {
    ParamStore ps;
    ps.create("x", Tensor({1}, {5.0}));
    AdamOptimizer opt({.lr = 0.1});
    // minimize x^2
    for (int it = 0; it < 200; ++it) {
        ps.zero_grads();
        ad::Tape tape;
        Binder bind(tape, ps);
        tape.backward(ad::square(bind("x")));
        bind.harvest();
        opt.step(ps);
    }
    CHECK(std::abs(ps.value("x").at(0)) < 0.05);
    CHECK(opt.step_count() == 200);
    CHECK(opt.moments().count("x") == 1);
}

TEST_CASE("adam prefix filter and frozen params stay put") {
    ParamStore ps;
    ps.create("g.a", Tensor({1}, {1.0}));
    ps.create("h.b", Tensor({1}, {1.0}));
    ps.create("g.frozen", Tensor({1}, {1.0}), false);
    for (auto& name : ps.names()) ps.at(name).grad = Tensor({1}, {1.0});
    AdamOptimizer opt({.lr = 0.1});
    opt.step(ps, "g.");
    CHECK(ps.value("g.a").at(0) != doctest::Approx(1.0));
    CHECK(ps.value("h.b").at(0) == doctest::Approx(1.0));
    CHECK(ps.value("g.frozen").at(0) == doctest::Approx(1.0));
}

TEST_CASE("linear and conv layers produce expected shapes") {
    ParamStore ps;
    Rng rng(41);
    LinearLayer lin = LinearLayer::create(ps, "lin", 4, 3, rng);
    Conv2dLayer conv = Conv2dLayer::create(ps, "conv", 2, 5, 3, 1, 1, rng);

    ad::Tape tape;
    Binder bind(tape, ps);
    ad::Var x = bind.input(rng.normal_tensor({2, 4}));
    ad::Var y = lin.forward(bind, x);
    CHECK(y.val().shape == std::vector<int>{2, 3});

    ad::Var img = bind.input(rng.normal_tensor({2, 6, 6}));
    ad::Var fm = conv.forward(bind, img);
    CHECK(fm.val().shape == std::vector<int>{5, 6, 6});
}

TEST_CASE("self attention output shape and attention matrix is row stochastic") {
    ParamStore ps;
    Rng rng(42);
    SelfAttention attn = SelfAttention::create(ps, "sa", 8, rng);
    ad::Tape tape;
    Binder bind(tape, ps);
    Tensor attn_mat;
    ad::Var y = attn.forward(bind, bind.input(rng.normal_tensor({5, 8})), &attn_mat);
    CHECK(y.val().shape == std::vector<int>{5, 8});
    REQUIRE(attn_mat.shape == std::vector<int>{5, 5});
    for (int r = 0; r < 5; ++r) {
        double row = 0.0;
        for (int c = 0; c < 5; ++c) {
            CHECK(attn_mat.at(r, c) >= 0.0);
            row += attn_mat.at(r, c);
        }
        CHECK(row == doctest::Approx(1.0));
    }
}

TEST_CASE("fresh lora adapter is a no-op on a linear layer") {
    ParamStore ps;
    Rng rng(43);
    LinearLayer lin = LinearLayer::create(ps, "lin", 6, 6, rng);
    LoraAdapter lora = LoraAdapter::create(ps, "lora.lin", 6, 6, 2, 1.0, rng);

    Tensor x0 = rng.normal_tensor({3, 6});
    ad::Tape t1;
    Binder b1(t1, ps);
    Tensor base = lin.forward(b1, b1.input(x0)).val();

    ad::Tape t2;
    Binder b2(t2, ps);
    Tensor adapted = lora_linear(b2, b2.input(x0), lin, &lora).val();
    for (int i = 0; i < base.size(); ++i)
        CHECK(adapted.at(static_cast<int>(i)) == doctest::Approx(base.at(static_cast<int>(i))));

    // up matrix starts at zero, down does not
    bool up_zero = true;
    for (double v : ps.value("lora.lin.up").data) up_zero = up_zero && v == 0.0;
    CHECK(up_zero);
    bool down_nonzero = false;
    for (double v : ps.value("lora.lin.down").data) down_nonzero = down_nonzero || v != 0.0;
    CHECK(down_nonzero);
}

TEST_CASE("trained lora changes the output") {
    ParamStore ps;
    Rng rng(44);
    LinearLayer lin = LinearLayer::create(ps, "lin", 4, 4, rng);
    LoraAdapter lora = LoraAdapter::create(ps, "lora.lin", 4, 4, 2, 1.0, rng);
    ps.value("lora.lin.up").at(0, 0) = 0.5;

    Tensor x0 = rng.normal_tensor({2, 4});
    ad::Tape t1;
    Binder b1(t1, ps);
    Tensor base = lin.forward(b1, b1.input(x0)).val();
    ad::Tape t2;
    Binder b2(t2, ps);
    Tensor adapted = lora_linear(b2, b2.input(x0), lin, &lora).val();
    double diff = 0.0;
    for (int i = 0; i < base.size(); ++i)
        diff += std::abs(adapted.at(static_cast<int>(i)) - base.at(static_cast<int>(i)));
    CHECK(diff > 1e-8);
}
