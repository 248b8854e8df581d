// Microbenchmarks for the hot paths: convolution forward/backward, a
// full alternating training step, whole-image translation, and the
// distribution-distance evaluation. Shapes mirror the toy-scale
// configurations the tests train at.

#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "dsmap/autodiff.hpp"
#include "dsmap/evaluate.hpp"
#include "dsmap/model.hpp"
#include "dsmap/nn.hpp"
#include "dsmap/rng.hpp"
#include "dsmap/tensor.hpp"
#include "dsmap/train.hpp"

using namespace dsmap;

namespace {

Tensor random_tensor(const std::vector<int64_t>& shape, uint64_t seed) {
    Tensor t(shape);
    Rng rng(seed);
    rng.fill_normal(t);
    return t;
}

Tensor random_image(int64_t size, uint64_t seed) {
    Tensor t({1, 3, size, size});
    Rng rng(seed);
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-1.0, 1.0);
    return t;
}

ModelConfig bench_model_config() {
    ModelConfig mc;
    mc.image_size = 32;
    mc.base_channels = 8;
    mc.n_downsample = 2;
    mc.n_res_shared = 1;
    mc.n_res_mapping = 1;
    mc.style_dim = 8;
    mc.n_gen_res = 2;
    mc.disc_layers = 2;
    return mc;
}

void BM_ConvForward(benchmark::State& state) {
    const int64_t ch = state.range(0);
    nn::ParamStore ps;
    Rng rng(1);
    nn::Conv2d conv(ps, "bench.conv", ch, ch, 3, 1, 1, rng);
    nn::InferenceGuard guard(ps);
    const ad::Value x = ad::constant(random_tensor({1, ch, 32, 32}, 2));
    for (auto _ : state) {
        ad::Value y = conv(x);
        benchmark::DoNotOptimize(y.val().data());
    }
}
BENCHMARK(BM_ConvForward)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_ConvForwardBackward(benchmark::State& state) {
    const int64_t ch = state.range(0);
    nn::ParamStore ps;
    Rng rng(1);
    nn::Conv2d conv(ps, "bench.conv", ch, ch, 3, 1, 1, rng);
    const Tensor input = random_tensor({1, ch, 32, 32}, 2);
    for (auto _ : state) {
        const ad::Value x = ad::leaf(input, /*requires_grad=*/true);
        ad::Value loss = ad::mean_all(conv(x));
        ad::backward(loss);
        benchmark::DoNotOptimize(loss.val().data());
    }
}
BENCHMARK(BM_ConvForwardBackward)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_Translate(benchmark::State& state) {
    DsmapModel model(bench_model_config());
    const ImageBatch x{random_image(32, 3)};
    const ImageBatch style{random_image(32, 4)};
    for (auto _ : state) {
        ImageBatch y = model.translate(x, style, DomainId::A, DomainId::B);
        benchmark::DoNotOptimize(y.data.data());
    }
}
BENCHMARK(BM_Translate)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
    DsmapModel model(bench_model_config());
    TrainConfig tc;
    Adam opt_g(model.generator_side_params(), tc);
    Adam opt_d(model.discriminator_params(), tc);
    const Tensor x_a = random_image(32, 5);
    const Tensor x_b = random_image(32, 6);
    int64_t step = 1;
    for (auto _ : state) {
        const Tensor s_a = model.sample_style(1, 100 + static_cast<uint64_t>(step)).data;
        const Tensor s_b = model.sample_style(1, 200 + static_cast<uint64_t>(step)).data;
        LossReport report = train_step(model, opt_g, opt_d, x_a, x_b, s_a, s_b, tc, step);
        benchmark::DoNotOptimize(report.step);
        ++step;
    }
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

void BM_ActivationStats(benchmark::State& state) {
    const Tensor features = random_tensor({256, 32}, 7);
    for (auto _ : state) {
        ActivationStats stats = activation_stats(features);
        benchmark::DoNotOptimize(stats.mean.data());
    }
}
BENCHMARK(BM_ActivationStats)->Unit(benchmark::kMillisecond);

void BM_FrechetDistance(benchmark::State& state) {
    const ActivationStats p = activation_stats(random_tensor({256, 32}, 8));
    const ActivationStats q = activation_stats(random_tensor({256, 32}, 9));
    for (auto _ : state) {
        double d = frechet_distance(p, q);
        benchmark::DoNotOptimize(d);
    }
}
BENCHMARK(BM_FrechetDistance)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
