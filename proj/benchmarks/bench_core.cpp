#include <benchmark/benchmark.h>

#include "osd/degrade.hpp"
#include "osd/faces.hpp"
#include "osd/generator.hpp"
#include "osd/losses.hpp"
#include "osd/schedule.hpp"
#include "osd/vre.hpp"

using namespace osd;

static void BM_BuildSchedule(benchmark::State& state) {
    for (auto _ : state) {
        NoiseSchedule s = build_schedule(1000, 8.5e-4, 1.2e-2);
        benchmark::DoNotOptimize(s.alpha_bars.back());
    }
}
BENCHMARK(BM_BuildSchedule);

static void BM_ForwardDiffuse(benchmark::State& state) {
    NoiseSchedule s = build_schedule(1000, 8.5e-4, 1.2e-2);
    Rng rng(1);
    Tensor z = rng.normal_tensor({4, 16, 16});
    Tensor eps = rng.normal_tensor({4, 16, 16});
    for (auto _ : state) {
        Tensor zt = forward_diffuse(z, 500, eps, s);
        benchmark::DoNotOptimize(zt.data.data());
    }
}
BENCHMARK(BM_ForwardDiffuse);

static void BM_DictionaryMatch(benchmark::State& state) {
    Rng rng(2);
    const int K = static_cast<int>(state.range(0));
    Tensor feats = rng.normal_tensor({K, 64});
    Tensor dict = rng.normal_tensor({256, 64});
    for (auto _ : state) {
        auto toks = match(feats, dict);
        benchmark::DoNotOptimize(toks.data());
    }
}
BENCHMARK(BM_DictionaryMatch)->Arg(16)->Arg(64);

static void BM_TokenEmbed(benchmark::State& state) {
    Rng rng(3);
    Tensor dict = rng.normal_tensor({256, 64});
    std::vector<int> tokens(64);
    for (size_t i = 0; i < tokens.size(); ++i) tokens[i] = static_cast<int>(rng.below(256));
    for (auto _ : state) {
        Tensor z = embed(tokens, dict);
        benchmark::DoNotOptimize(z.data.data());
    }
}
BENCHMARK(BM_TokenEmbed);

static void BM_Conv2dForward(benchmark::State& state) {
    ParamStore ps;
    Rng rng(4);
    Conv2dLayer conv = Conv2dLayer::create(ps, "c", 16, 16, 3, 1, 1, rng);
    Tensor x = rng.normal_tensor({16, 32, 32});
    for (auto _ : state) {
        ad::Tape tape;
        Binder bind(tape, ps);
        ad::Var y = conv.forward(bind, bind.input(x));
        benchmark::DoNotOptimize(y.val().data.data());
    }
}
BENCHMARK(BM_Conv2dForward);

static void BM_Dists(benchmark::State& state) {
    ParamStore ps;
    SeededPyramidExtractor feat(ps, "fx.", 99);
    Tensor a = make_face(10, 64).image;
    Tensor b = make_face(11, 64).image;
    for (auto _ : state) {
        double v = dists(a, b, feat, ps);
        benchmark::DoNotOptimize(v);
    }
}
BENCHMARK(BM_Dists);

static void BM_Degrade(benchmark::State& state) {
    Tensor img = make_face(12, 64).image;
    DegradationRecipe r;
    r.seed = 5;
    for (auto _ : state) {
        DegradeResult res = degrade(img, r);
        benchmark::DoNotOptimize(res.image.data.data());
    }
}
BENCHMARK(BM_Degrade);

static void BM_OneStepRestore(benchmark::State& state) {
    ParamStore ps;
    GeneratorConfig cfg;
    cfg.T_L = 250;
    Rng rng(6);
    NoiseSchedule sched = build_schedule(1000, 8.5e-4, 1.2e-2);
    AutoencoderModel ae = AutoencoderModel::create(ps, "ae.", cfg, rng);
    DenoiserModel unet = DenoiserModel::create(ps, "unet.", cfg, rng);
    Tensor prompt = rng.normal_tensor({64, cfg.prompt_dim});
    Tensor img = make_face(13, 64).image;
    for (auto _ : state) {
        Tensor out = one_step_restore(img, prompt, unet, ae, cfg, sched, ps);
        benchmark::DoNotOptimize(out.data.data());
    }
}
BENCHMARK(BM_OneStepRestore);

BENCHMARK_MAIN();
