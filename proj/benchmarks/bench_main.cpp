#include <benchmark/benchmark.h>

#include <random>

#include "patchseg/inference.hpp"
#include "patchseg/metrics.hpp"
#include "patchseg/reference_net.hpp"
#include "patchseg/synthdata.hpp"

using namespace patchseg;

namespace {

Tensor<float> random_input(int batch, int crop) {
    Tensor<float> t(batch, 3, crop, crop);
    std::mt19937 rng(1);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    for (auto& v : t.data) v = u(rng);
    return t;
}

void BM_Forward(benchmark::State& state) {
    ReferenceNet<float> net(net_preset("small"), 1);
    net.set_training(true);
    const Tensor<float> x = random_input(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
    for (auto _ : state) benchmark::DoNotOptimize(net.forward(x));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Forward)->Args({16, 64})->Args({4, 128})->Unit(benchmark::kMillisecond);

void BM_ForwardBackward(benchmark::State& state) {
    ReferenceNet<float> net(net_preset("small"), 1);
    net.set_training(true);
    const Tensor<float> x = random_input(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
    for (auto _ : state) {
        net.zero_grad();
        const Tensor<float> y = net.forward(x);
        Tensor<float> g(y.n, y.c, y.h, y.w, 1e-3f);
        benchmark::DoNotOptimize(net.backward(g, false));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardBackward)->Args({16, 64})->Unit(benchmark::kMillisecond);

void BM_InferFrame(benchmark::State& state) {
    PhantomParams p;
    p.size = 128;
    const PreparedStack stack = prepare(generate_stack(p, 3));
    const FusedFrame frame = fuse_z(stack.windowed, 0);
    ReferenceNet<float> net(net_preset("small"), 1);
    net.mark_trained();
    Backbone<float>* models[] = {&net};
    const WindowGrid grid = window_grid(128, 64, 3.0);
    const bool sliding = state.range(0) == 1;
    for (auto _ : state) {
        if (sliding) benchmark::DoNotOptimize(sliding_infer_frame(models, frame, grid));
        else benchmark::DoNotOptimize(fullconv_infer_frame(models, frame));
    }
    state.SetLabel(sliding ? "sliding C=64 beta=3" : "fullconv");
}
BENCHMARK(BM_InferFrame)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);

void BM_AveragePrecision(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    std::mt19937 rng(2);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    std::vector<float> s(n);
    std::vector<std::uint8_t> l(n);
    for (std::size_t i = 0; i < n; ++i) {
        s[i] = u(rng);
        l[i] = u(rng) < 0.01f;
    }
    for (auto _ : state) benchmark::DoNotOptimize(average_precision<float>(s, l));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_AveragePrecision)->Arg(1 << 16)->Arg(1 << 20)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
