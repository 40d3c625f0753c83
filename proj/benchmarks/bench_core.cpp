#include <benchmark/benchmark.h>

#include "ldp/adamw.hpp"
#include "ldp/backend.hpp"
#include "ldp/noise_schedule.hpp"
#include "ldp/prior_losses.hpp"
#include "ldp/renderers.hpp"

using namespace ldp;

namespace {

Tensor latent(int side, uint64_t seed) {
    Rng rng(seed);
    return Tensor::randn({4, side, side}, rng);
}

void BM_BuildSchedule(benchmark::State& state) {
    for (auto _ : state) {
        benchmark::DoNotOptimize(build_linear_schedule(1000, 0.00085, 0.012));
    }
}
BENCHMARK(BM_BuildSchedule);

void BM_Perturb(benchmark::State& state) {
    const NoiseSchedule schedule = default_schedule();
    const Tensor v   = latent(64, 1);
    const Tensor eps = latent(64, 2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(perturb(v, eps, 500, schedule));
    }
}
BENCHMARK(BM_Perturb);

void BM_KlLoss(benchmark::State& state) {
    const Tensor v = latent(static_cast<int>(state.range(0)), 3);
    for (auto _ : state) {
        benchmark::DoNotOptimize(kl_loss(v));
    }
}
BENCHMARK(BM_KlLoss)->Arg(8)->Arg(64);

void BM_FmLoss(benchmark::State& state) {
    auto decoder   = make_mock_linear_decoder(7);
    const int side = static_cast<int>(state.range(0));
    const Tensor v = latent(side, 4);
    const Tensor r = latent(side, 5) * 0.3;
    FmOptions fm;
    fm.levels = {0, 1, 2};
    for (auto _ : state) {
        benchmark::DoNotOptimize(fm_loss(v, r, *decoder, fm));
    }
}
BENCHMARK(BM_FmLoss)->Arg(8)->Arg(32)->Arg(64);

void BM_FmBranchGradients(benchmark::State& state) {
    auto decoder   = make_mock_linear_decoder(7);
    const int side = static_cast<int>(state.range(0));
    const Tensor v = latent(side, 6);
    const Tensor r = latent(side, 7) * 0.3;
    FmOptions fm;
    fm.levels = {0, 1, 2};
    for (auto _ : state) {
        benchmark::DoNotOptimize(fm_branch_gradients(v, r, *decoder, fm));
    }
}
BENCHMARK(BM_FmBranchGradients)->Arg(8)->Arg(32)->Arg(64);

void BM_CombinedStep(benchmark::State& state) {
    const int side = static_cast<int>(state.range(0));
    auto schedule  = std::make_shared<const NoiseSchedule>(default_schedule());
    BackendSpec spec;
    const BackendBundle bundle = make_backend(spec, {4, side, side}, schedule);
    const TextCondition cond   = bundle.embedder->condition("bench");

    const Tensor v   = latent(side, 8);
    const Tensor eps = latent(side, 9);
    PriorWeights weights;
    weights.lambda_fm  = 3.0;
    weights.lambda_kl  = 0.1;
    weights.lambda_lsd = 1.0;
    StepOptions opts;
    opts.fm.levels = {0, 1, 2};

    for (auto _ : state) {
        benchmark::DoNotOptimize(
            combined_step(v, 500, eps, bundle, *schedule, weights, opts, cond));
    }
}
BENCHMARK(BM_CombinedStep)->Arg(8)->Arg(32)->Arg(64);

void BM_AdamStep(benchmark::State& state) {
    Rng rng(10);
    auto renderer = init_latent_map(rng);
    auto params   = renderer->params();
    params[0].grad->fill(0.01);
    AdamW adam(AdamWConfig{});
    for (auto _ : state) {
        adam.step(params);
    }
}
BENCHMARK(BM_AdamStep);

}  // namespace

BENCHMARK_MAIN();
