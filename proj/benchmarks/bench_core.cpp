// Microbenchmarks for the hot paths: scene synthesis, spectral convolution,
// dense convolution, the full forward pass, and one training gradient step.

#include <benchmark/benchmark.h>

#include "hydropinn/model.hpp"
#include "hydropinn/rng.hpp"
#include "hydropinn/scene.hpp"
#include "hydropinn/tape.hpp"

using namespace hydropinn;

namespace {

Scene bench_scene(int grid) {
    SceneConfig cfg;
    cfg.grid_size = grid;
    cfg.rng_seed = 7;
    return make_scene(cfg);
}

ad::Tensor random_tensor(ad::Shape shape, Rng& rng) {
    ad::Tensor t(shape);
    for (auto& v : t.v) v = rng.normal();
    return t;
}

}  // namespace

static void BM_MakeScene(benchmark::State& state) {
    SceneConfig cfg;
    cfg.grid_size = static_cast<int>(state.range(0));
    std::uint64_t seed = 0;
    for (auto _ : state) {
        cfg.rng_seed = seed++;
        benchmark::DoNotOptimize(make_scene(cfg));
    }
}
BENCHMARK(BM_MakeScene)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

static void BM_SpectralConv(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const int c = 16, k = n / 4;
    Rng rng(3);
    ad::Tensor x = random_tensor(ad::shape3(c, n, n), rng);
    ad::Tensor w = random_tensor(ad::shape4(c, c, 2 * k, 4 * k), rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(spectral_conv2d(x, w, k));
    }
}
BENCHMARK(BM_SpectralConv)->Arg(16)->Arg(32)->Unit(benchmark::kMicrosecond);

static void BM_Conv2d(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    Rng rng(4);
    ad::Tensor x = random_tensor(ad::shape3(16, n, n), rng);
    ad::Tensor w = random_tensor(ad::shape4(16, 16, 3, 3), rng);
    ad::Tensor b = random_tensor(ad::shape1(16), rng);
    for (auto _ : state) {
        ad::Tape tp;
        benchmark::DoNotOptimize(
            tp.val(tp.conv2d(tp.leaf(x), tp.leaf(w), tp.leaf(b), 1)));
    }
}
BENCHMARK(BM_Conv2d)->Arg(32)->Arg(64)->Unit(benchmark::kMicrosecond);

static void BM_Forward(benchmark::State& state) {
    Scene sc = bench_scene(64);
    ModelConfig mcfg;
    ModelParams params = init_params(mcfg);
    for (auto _ : state) {
        benchmark::DoNotOptimize(forward(params, sc.sar_vh, sc.dem, mcfg));
    }
}
BENCHMARK(BM_Forward)->Unit(benchmark::kMillisecond);

static void BM_LossGradients(benchmark::State& state) {
    Scene sc = bench_scene(64);
    ModelConfig mcfg;
    ModelParams params = init_params(mcfg);
    LossWeights w;
    PhysicsConfig pcfg;
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            loss_gradients(params, sc, 20, mcfg, w, pcfg));
    }
}
BENCHMARK(BM_LossGradients)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
