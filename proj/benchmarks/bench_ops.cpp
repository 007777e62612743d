#include <benchmark/benchmark.h>

#include <random>

#include "wrecon/graph.hpp"
#include "wrecon/ops.hpp"

using namespace wrecon;
using namespace wrecon::ops;

namespace {

Tensor<float> randn(Shape s, std::mt19937_64& rng, float scale = 1.0f) {
    std::normal_distribution<float> n(0.0f, scale);
    Tensor<float> t(std::move(s));
    for (auto& v : t.data) v = n(rng);
    return t;
}

void BM_conv2d(benchmark::State& state) {
    const int size = static_cast<int>(state.range(0));
    const int ch = static_cast<int>(state.range(1));
    std::mt19937_64 rng(1);
    const auto x = randn({ch, size, size}, rng);
    const auto w = randn({ch, ch, 3, 3}, rng, 0.1f);
    for (auto _ : state) {
        Graph<float> g(nullptr, false);
        Var y = conv2d(g, g.input(x), g.input(w), Var{}, 1, 1);
        benchmark::DoNotOptimize(g.value(y).data.data());
    }
    state.SetItemsProcessed(state.iterations() * size * size * ch * ch * 9);
}
BENCHMARK(BM_conv2d)->Args({32, 8})->Args({64, 8})->Args({64, 16});

void BM_deform_conv2d(benchmark::State& state) {
    const int size = static_cast<int>(state.range(0));
    const int ch = static_cast<int>(state.range(1));
    std::mt19937_64 rng(2);
    const auto x = randn({ch, size, size}, rng);
    const auto off = randn({18, size, size}, rng, 0.5f);
    const auto w = randn({ch, ch, 3, 3}, rng, 0.1f);
    for (auto _ : state) {
        Graph<float> g(nullptr, false);
        Var y = deform_conv2d(g, g.input(x), g.input(off), g.input(w), Var{});
        benchmark::DoNotOptimize(g.value(y).data.data());
    }
    state.SetItemsProcessed(state.iterations() * size * size * ch * ch * 9);
}
BENCHMARK(BM_deform_conv2d)->Args({32, 8})->Args({64, 8});

void BM_deform_conv2d_backward(benchmark::State& state) {
    const int size = static_cast<int>(state.range(0));
    std::mt19937_64 rng(3);
    const auto x = randn({8, size, size}, rng);
    const auto off = randn({18, size, size}, rng, 0.5f);
    const auto w = randn({8, 8, 3, 3}, rng, 0.1f);
    for (auto _ : state) {
        Graph<float> g;
        Var y = deform_conv2d(g, g.input(x, true), g.input(off, true), g.input(w, true), Var{});
        Var loss = smooth_l1(g, y, g.input(Tensor<float>(g.value(y).shape)), 1.0f);
        g.backward(loss);
        benchmark::DoNotOptimize(g.grad(y).data.data());
    }
}
BENCHMARK(BM_deform_conv2d_backward)->Arg(32)->Arg(64);

}  // namespace
