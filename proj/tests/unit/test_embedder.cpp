#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "wrecon/embedder.hpp"
#include "wrecon/grad_check.hpp"
#include "wrecon/ops.hpp"

using namespace wrecon;

namespace {

EmbedderConfig small_cfg() {
    EmbedderConfig c;
    c.channels = 4;
    c.codebook_size = 3;
    c.template_h = 4;
    c.template_w = 4;
    c.mixer_hidden = 8;
    return c;
}

struct Fixture {
    ParamStore<double> store;
    Embedder<double> emb;
    explicit Fixture(const EmbedderConfig& cfg, std::uint64_t seed = 1) {
        std::mt19937_64 rng(seed);
        emb = Embedder<double>(cfg, store, rng);
    }
};

std::vector<AvailabilityMask> all_masks() {
    std::vector<AvailabilityMask> out;
    for (int bits = 1; bits < 16; ++bits) {
        AvailabilityMask m(std::vector<bool>(4, false));
        for (int i = 0; i < 4; ++i)
            if (bits & (1 << i)) m.set(i);
        out.push_back(m);
    }
    return out;
}

}  // namespace

TEST_CASE("projection matches the per-variable oracle on all 15 subsets") {
    Fixture f(small_cfg());
    std::mt19937_64 rng(2);
    const auto& W = f.store.value("embedder.uoa.W");
    for (const auto& mask : all_masks()) {
        const auto present = mask.present();
        const auto xs = oracle::random_tensor({static_cast<int>(present.size()), 5, 6}, rng);
        Graph<double> g(&f.store, false);
        const auto& z0 = g.value(f.emb.project(g, g.input(xs), mask));
        REQUIRE(z0.shape == Shape{4, 5, 6});
        for (int c = 0; c < 4; ++c)
            for (int y = 0; y < 5; ++y)
                for (int x = 0; x < 6; ++x) {
                    double ref = 0;
                    for (std::size_t s = 0; s < present.size(); ++s)
                        ref += W[static_cast<std::size_t>(present[s]) * 4 + c] * xs.at(static_cast<int>(s), y, x);
                    CHECK(z0.at(c, y, x) == doctest::Approx(ref).epsilon(1e-12));
                }
    }
}

TEST_CASE("mixing weights lie on the simplex") {
    Fixture f(small_cfg());
    std::mt19937_64 rng(3);
    for (const auto& mask : all_masks()) {
        Graph<double> g(&f.store, false);
        const auto& a = g.value(f.emb.mix(g, g.input(oracle::random_tensor({4}, rng, 5.0)), mask));
        double s = 0;
        for (double v : a.data) {
            CHECK(v >= 0.0);
            s += v;
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("the mask reaches the mixer only when enabled") {
    std::mt19937_64 rng(4);
    const auto state = oracle::random_tensor({4}, rng);
    const auto masks = all_masks();
    for (bool uses : {true, false}) {
        auto cfg = small_cfg();
        cfg.mixer_uses_mask = uses;
        Fixture f(cfg);
        Graph<double> g(&f.store, false);
        const auto a = g.value(f.emb.mix(g, g.input(state), masks[0]));
        const auto b = g.value(f.emb.mix(g, g.input(state), masks[14]));
        double diff = 0;
        for (std::size_t i = 0; i < a.size(); ++i) diff = std::max(diff, std::abs(a[i] - b[i]));
        if (uses)
            CHECK(diff > 1e-6);
        else
            CHECK(diff == 0.0);
    }
}

TEST_CASE("blend is linear in the mixing weights") {
    Fixture f(small_cfg());
    std::mt19937_64 rng(5);
    auto blend_of = [&](const Tensor<double>& a) {
        Graph<double> g(&f.store, false);
        return g.value(f.emb.blend(g, g.input(a), 8, 12));
    };
    Tensor<double> e0({3}, std::vector<double>{1, 0, 0}), e1({3}, std::vector<double>{0, 1, 0}),
        e2({3}, std::vector<double>{0, 0, 1});
    const Tensor<double> a({3}, std::vector<double>{0.2, 0.5, 0.3});
    const auto p = blend_of(a), p0 = blend_of(e0), p1 = blend_of(e1), p2 = blend_of(e2);
    REQUIRE(p.shape == Shape{4, 8, 12});
    for (std::size_t i = 0; i < p.size(); ++i)
        CHECK(p[i] == doctest::Approx(0.2 * p0[i] + 0.5 * p1[i] + 0.3 * p2[i]).epsilon(1e-12));
    // A one-hot mix at the template resolution returns the template itself.
    Graph<double> g(&f.store, false);
    const auto& t1 = g.value(f.emb.blend(g, g.input(e1), 4, 4));
    const auto& ref = f.store.value("embedder.scp.templates.1");
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(t1[i] == doctest::Approx(ref[i]).epsilon(1e-12));
}

TEST_CASE("zero interaction projection leaves the features unchanged") {
    Fixture f(small_cfg());
    f.store.value("embedder.interact.proj.weight").fill(0.0);
    f.store.value("embedder.interact.proj.bias").fill(0.0);
    std::mt19937_64 rng(6);
    const AvailabilityMask mask = AvailabilityMask::full(4);
    const auto xs = oracle::random_tensor({4, 6, 6}, rng);
    Graph<double> g(&f.store, false);
    const auto& z0 = g.value(f.emb.project(g, g.input(xs), mask));
    const auto& z1 = g.value(f.emb.forward(g, g.input(xs), mask));
    for (std::size_t i = 0; i < z0.size(); ++i) CHECK(z1[i] == z0[i]);
}

TEST_CASE("prompting disabled gives Z1 = Z0") {
    auto cfg = small_cfg();
    cfg.use_prompt = false;
    Fixture f(cfg);
    CHECK_FALSE(f.store.contains("embedder.scp.templates.0"));
    std::mt19937_64 rng(7);
    const AvailabilityMask mask(std::vector<bool>{true, false, true, false});
    const auto xs = oracle::random_tensor({2, 4, 4}, rng);
    Graph<double> g(&f.store, false);
    const auto& z0 = g.value(f.emb.project(g, g.input(xs), mask));
    const auto& z1 = g.value(f.emb.forward(g, g.input(xs), mask));
    CHECK(z0.data == z1.data);
}

TEST_CASE("embedder gradients") {
    Fixture f(small_cfg(), 8);
    std::mt19937_64 rng(9);
    const AvailabilityMask mask(std::vector<bool>{true, true, false, true});
    const auto xs = oracle::random_tensor({3, 8, 8}, rng);
    const auto target = oracle::random_tensor({4, 8, 8}, rng);
    const auto r = grad_check(f.store,
                              [&](Graph<double>& g) {
                                  auto z = f.emb.forward(g, g.input(xs), mask);
                                  return ops::sum_squares(g, ops::add(g, z, g.input(target)));
                              },
                              GradCheckOptions{1e-6, 1e-5, 400, 1});
    INFO(r.worst.param << " " << r.worst.analytic << " vs " << r.worst.numeric);
    CHECK(r.passed);
}

TEST_CASE("embedder configuration is validated") {
    auto cfg = small_cfg();
    cfg.codebook_size = 0;
    CHECK_THROWS(cfg.validate());
    cfg = small_cfg();
    cfg.channels = -1;
    CHECK_THROWS(cfg.validate());
}
