#include <benchmark/benchmark.h>

#include <random>

#include "wrecon/model.hpp"
#include "wrecon/ops.hpp"

using namespace wrecon;
using namespace wrecon::ops;

const int n_vars = static_cast<int>(VariableUniverse::standard_names().size());

namespace {

ModelConfig smoke_model() {
    ModelConfig m;
    m.embedder.channels = 8;
    m.embedder.codebook_size = 8;
    m.embedder.template_h = 16;
    m.embedder.template_w = 16;
    m.embedder.mixer_hidden = 32;
    return m;
}

Tensor<float> inputs(int n, int size) {
    std::mt19937_64 rng(5);
    std::normal_distribution<float> d(0.0f, 1.0f);
    Tensor<float> t({n, size, size});
    for (auto& v : t.data) v = d(rng);
    return t;
}

void BM_model_predict(benchmark::State& state) {
    const int size = static_cast<int>(state.range(0));
    Model<float> model(smoke_model(), 11);
    const auto mask = AvailabilityMask::full(n_vars);
    const auto xs = inputs(n_vars, size);
    for (auto _ : state) benchmark::DoNotOptimize(model.predict(xs, mask).data.data());
}
BENCHMARK(BM_model_predict)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_model_train_step(benchmark::State& state) {
    const int size = static_cast<int>(state.range(0));
    Model<float> model(smoke_model(), 11);
    const auto mask = AvailabilityMask::full(n_vars);
    const auto xs = inputs(n_vars, size);
    const Tensor<float> target({3, size, size});
    for (auto _ : state) {
        Graph<float> g(&model.params());
        Var pred = model.forward(g, g.input(xs), mask);
        Var loss = smooth_l1(g, pred, g.input(target), 1.0f);
        g.backward(loss);
        benchmark::DoNotOptimize(g.value(loss).data.data());
    }
}
BENCHMARK(BM_model_train_step)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace
