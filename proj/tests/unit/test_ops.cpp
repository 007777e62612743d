#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "wrecon/errors.hpp"
#include "wrecon/grad_check.hpp"
#include "wrecon/ops.hpp"

using namespace wrecon;

namespace {

constexpr GradCheckOptions kStrict{1e-6, 1e-5, 0, 0};

void require_grads(ParamStore<double>& store, const LossBuilder& loss) {
    const auto r = grad_check(store, loss, kStrict);
    INFO(r.worst.param << "[" << r.worst.index << "] analytic " << r.worst.analytic << " numeric "
                       << r.worst.numeric << " " << r.failure);
    CHECK(r.passed);
    CHECK(r.checked == store.total_elements());
}

// Offsets kept away from integer sample coordinates so that central
// differences never straddle a bilinear kink.
Tensor<double> fractional_offsets(int taps, int h, int w, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> frac(0.2, 0.8);
    std::bernoulli_distribution sign(0.5);
    Tensor<double> t({2 * taps, h, w});
    for (auto& v : t.data) v = (sign(rng) ? 1.0 : -1.0) * frac(rng);
    return t;
}

// Weighted sum of all outputs so every output gradient is distinct.
Var probe(Graph<double>& g, Var y, const Tensor<double>& weights) {
    return ops::sum_squares(g, ops::mul(g, y, g.input(weights)));
}

}  // namespace

TEST_CASE("bilinear sampling examples") {
    // 2x2 plane [[0, 1], [2, 3]]
    const double plane[4] = {0, 1, 2, 3};
    CHECK(kernels::bilinear_sample(plane, 2, 2, 0.5, 0.5) == doctest::Approx(1.5));
    CHECK(kernels::bilinear_sample(plane, 2, 2, 0.0, 1.0) == 1.0);
    CHECK(kernels::bilinear_sample(plane, 2, 2, 1.0, 0.25) == doctest::Approx(2.25));
    // Outside the plane: clamped to the border.
    CHECK(kernels::bilinear_sample(plane, 2, 2, -3.0, -3.0) == 0.0);
    CHECK(kernels::bilinear_sample(plane, 2, 2, 7.0, 0.5) == doctest::Approx(2.5));
    const auto tap = kernels::bilinear_tap<double>(2, 2, 0.25, 0.75);
    double s = 0;
    for (double w : tap.weight) s += w;
    CHECK(s == doctest::Approx(1.0));
    const auto clamped = kernels::bilinear_tap<double>(2, 2, -1.5, 0.5);
    for (double d : clamped.dwdy) CHECK(d == 0.0);
}

TEST_CASE("half-pixel resize axis") {
    const auto a = kernels::resize_axis(2, 4);
    // Output centres map to -0.25, 0.25, 0.75, 1.25 in input coordinates.
    const double in[2] = {10.0, 20.0};
    std::vector<double> out;
    for (std::size_t o = 0; o < 4; ++o)
        out.push_back((1 - a.frac[o]) * in[a.lo[o]] + a.frac[o] * in[a.hi[o]]);
    CHECK(out[0] == doctest::Approx(10.0));
    CHECK(out[1] == doctest::Approx(12.5));
    CHECK(out[2] == doctest::Approx(17.5));
    CHECK(out[3] == doctest::Approx(20.0));
}

TEST_CASE("upsampling a constant is constant") {
    Graph<double> g;
    auto y = ops::upsample_bilinear(g, g.input(Tensor<double>({2, 3, 5}, 4.25)), 6, 10);
    CHECK(g.value(y).shape == Shape{2, 6, 10});
    for (double v : g.value(y).data) CHECK(v == doctest::Approx(4.25).epsilon(1e-15));
}

TEST_CASE("softmax of equal logits is uniform") {
    Graph<double> g;
    auto y = ops::softmax(g, g.input(Tensor<double>({5}, 3.7)));
    for (double v : g.value(y).data) CHECK(v == doctest::Approx(0.2));
    Graph<double> h;
    auto big = ops::softmax(h, h.input(Tensor<double>({2}, std::vector<double>{1000.0, 0.0})));
    CHECK(std::isfinite(h.value(big)[1]));
    CHECK(h.value(big)[0] == doctest::Approx(1.0));
}

TEST_CASE("smooth L1 hand values") {
    Graph<double> g;
    auto p = g.input(Tensor<double>({2}, std::vector<double>{0.5, 2.0}));
    auto t = g.input(Tensor<double>({2}, 0.0));
    // 0.5 * 0.25 = 0.125 and 2 - 0.5 = 1.5, averaged.
    CHECK(g.value(ops::smooth_l1(g, p, t, 1.0))[0] == doctest::Approx((0.125 + 1.5) / 2));
}

TEST_CASE("conv2d matches the direct oracle") {
    std::mt19937_64 rng(1);
    for (auto [k, stride, pad] : {std::tuple{3, 1, 1}, std::tuple{5, 1, 2}, std::tuple{3, 2, 1}, std::tuple{1, 1, 0}}) {
        const auto x = oracle::random_tensor({3, 9, 8}, rng);
        const auto w = oracle::random_tensor({4, 3, k, k}, rng);
        const auto b = oracle::random_tensor({4}, rng);
        Graph<double> g;
        auto y = ops::conv2d(g, g.input(x), g.input(w), g.input(b), stride, pad);
        const auto ref = oracle::conv2d(x, w, &b, stride, pad);
        REQUIRE(g.value(y).shape == ref.shape);
        for (std::size_t i = 0; i < ref.size(); ++i) CHECK(g.value(y)[i] == doctest::Approx(ref[i]).epsilon(1e-12));
    }
}

TEST_CASE("deformable conv with zero offsets is a replicate-padded conv") {
    std::mt19937_64 rng(2);
    const auto x = oracle::random_tensor({2, 7, 6}, rng);
    const auto w = oracle::random_tensor({3, 2, 3, 3}, rng);
    const auto b = oracle::random_tensor({3}, rng);
    Graph<double> g;
    auto y = ops::deform_conv2d(g, g.input(x), g.input(Tensor<double>({18, 7, 6})), g.input(w), g.input(b));
    const auto ref = oracle::conv2d_replicate(x, w, &b);
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(g.value(y)[i] == doctest::Approx(ref[i]).epsilon(1e-12));
    // In the interior, identical to the zero-padded conv.
    const auto zp = oracle::conv2d(x, w, &b, 1, 1);
    for (int o = 0; o < 3; ++o)
        for (int i = 1; i < 6; ++i)
            for (int j = 1; j < 5; ++j) CHECK(g.value(y).at(o, i, j) == doctest::Approx(zp.at(o, i, j)));
}

TEST_CASE("deformable conv with an integer shift reads shifted pixels") {
    std::mt19937_64 rng(3);
    const auto x = oracle::random_tensor({1, 6, 6}, rng);
    Tensor<double> w({1, 1, 1, 1}, 1.0);
    Tensor<double> off({2, 6, 6});
    for (std::size_t i = 0; i < 36; ++i) off[36 + i] = 1.0;  // dx = +1
    Graph<double> g;
    auto y = ops::deform_conv2d(g, g.input(x), g.input(off), g.input(w), Var{});
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) CHECK(g.value(y).at(0, i, j) == doctest::Approx(x.at(0, i, std::min(j + 1, 5))));
}

TEST_CASE("shape errors are reported") {
    Graph<double> g;
    auto x = g.input(Tensor<double>({2, 4, 4}));
    CHECK_THROWS_AS(ops::conv2d(g, x, g.input(Tensor<double>({1, 3, 3, 3})), Var{}, 1, 1), DataError);
    CHECK_THROWS_AS(ops::add(g, x, g.input(Tensor<double>({2, 4, 5}))), DataError);
    CHECK_THROWS_AS(ops::deform_conv2d(g, x, g.input(Tensor<double>({18, 4, 4})), g.input(Tensor<double>({1, 3, 3, 3})), Var{}),
                    DataError);
}

TEST_CASE("gradients: conv2d, relu, add, mul") {
    std::mt19937_64 rng(10);
    ParamStore<double> s;
    s.add("x", oracle::random_tensor({2, 6, 5}, rng));
    s.add("w", oracle::random_tensor({3, 2, 3, 3}, rng));
    s.add("b", oracle::random_tensor({3}, rng));
    s.add("w2", oracle::random_tensor({3, 3, 3, 3}, rng));
    const auto weights = oracle::random_tensor({3, 3, 3}, rng);
    require_grads(s, [&](Graph<double>& g) {
        auto h = ops::conv2d(g, g.param("x"), g.param("w"), g.param("b"), 1, 1);
        auto a = ops::relu(g, h);
        auto d = ops::conv2d(g, ops::add(g, a, h), g.param("w2"), Var{}, 2, 1);
        return probe(g, d, weights);
    });
}

TEST_CASE("gradients: deformable conv including offsets") {
    std::mt19937_64 rng(11);
    ParamStore<double> s;
    s.add("x", oracle::random_tensor({2, 5, 6}, rng));
    s.add("off", fractional_offsets(9, 5, 6, rng));
    s.add("w", oracle::random_tensor({2, 2, 3, 3}, rng));
    s.add("b", oracle::random_tensor({2}, rng));
    const auto weights = oracle::random_tensor({2, 5, 6}, rng);
    require_grads(s, [&](Graph<double>& g) {
        return probe(g, ops::deform_conv2d(g, g.param("x"), g.param("off"), g.param("w"), g.param("b")), weights);
    });
}

TEST_CASE("gradients: upsampling, pooling, linear, softmax, weighted sum") {
    std::mt19937_64 rng(12);
    ParamStore<double> s;
    s.add("x", oracle::random_tensor({2, 3, 4}, rng));
    s.add("y", oracle::random_tensor({2, 6, 8}, rng));
    s.add("W", oracle::random_tensor({3, 2}, rng));
    s.add("b", oracle::random_tensor({3}, rng));
    const auto weights = oracle::random_tensor({2, 6, 8}, rng);
    require_grads(s, [&](Graph<double>& g) {
        auto up = ops::upsample_bilinear(g, g.param("x"), 6, 8);
        auto pooled = ops::global_avg_pool(g, g.param("y"));
        auto logits = ops::linear(g, pooled, g.param("W"), g.param("b"));
        auto a = ops::softmax(g, logits);
        auto mixed = ops::weighted_sum(g, {up, g.param("y"), ops::relu(g, up)}, a);
        return probe(g, mixed, weights);
    });
}

TEST_CASE("gradients: concat, gather projection, smooth L1") {
    std::mt19937_64 rng(13);
    ParamStore<double> s;
    s.add("xs", oracle::random_tensor({2, 4, 4}, rng));
    s.add("W", oracle::random_tensor({4, 3}, rng));
    s.add("z", oracle::random_tensor({1, 4, 4}, rng));
    const std::vector<int> rows{0, 2};
    const auto target = oracle::random_tensor({4, 4, 4}, rng, 2.0);
    require_grads(s, [&](Graph<double>& g) {
        auto p = ops::gather_project(g, g.param("xs"), g.param("W"), rows);
        auto c = ops::concat(g, p, g.param("z"));
        return ops::smooth_l1(g, c, g.input(target), 0.7);
    });
}

TEST_CASE("gather projection uses the selected rows") {
    Tensor<double> xs({2, 1, 1}, std::vector<double>{2.0, 3.0});
    Tensor<double> w({4, 2}, std::vector<double>{1, 10, 100, 1000, 5, 6, 7, 8});
    Graph<double> g;
    const std::vector<int> rows{1, 3};
    auto y = ops::gather_project(g, g.input(xs), g.input(w), rows);
    CHECK(g.value(y)[0] == doctest::Approx(2 * 100 + 3 * 7));
    CHECK(g.value(y)[1] == doctest::Approx(2 * 1000 + 3 * 8));
}

TEST_CASE("backward accumulates over graphs") {
    ParamStore<double> s;
    s.add("a", Tensor<double>({1}, 3.0));
    for (int i = 0; i < 2; ++i) {
        Graph<double> g(&s);
        g.backward(ops::sum_squares(g, g.param("a")));
    }
    CHECK(s.grad(0)[0] == doctest::Approx(12.0));
    s.zero_grad();
    CHECK(s.grad(0)[0] == 0.0);
}
