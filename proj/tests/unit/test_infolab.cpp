#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "wrecon/errors.hpp"
#include "wrecon/infolab.hpp"

using namespace wrecon;

TEST_CASE("entropy hand values") {
    // Uniform w over 4 states, independent of a binary x.
    DiscreteJoint uniform{{4, 2}, std::vector<double>(8, 1.0 / 8)};
    CHECK(cond_entropy(uniform, {}) == doctest::Approx(std::log(4.0)).epsilon(1e-14));
    CHECK(cond_entropy(uniform, {1}) == doctest::Approx(std::log(4.0)).epsilon(1e-14));
    // w = x: knowing x removes all uncertainty.
    DiscreteJoint copy{{2, 2}, {0.5, 0.0, 0.0, 0.5}};
    CHECK(cond_entropy(copy, {}) == doctest::Approx(std::log(2.0)));
    CHECK(cond_entropy(copy, {1}) == 0.0);
}

TEST_CASE("conditional entropy matches the enumeration oracle") {
    std::mt19937_64 rng(1);
    const std::vector<int> cards{3, 2, 4, 2};
    for (int trial = 0; trial < 20; ++trial) {
        const auto j = random_joint(cards, rng);
        for (const auto& given : std::vector<std::vector<int>>{{}, {1}, {2}, {1, 3}, {1, 2, 3}, {3, 2}})
            CHECK(std::abs(cond_entropy(j, given) - oracle::cond_entropy(cards, j.p, given)) <= 1e-12);
    }
}

TEST_CASE("conditioning never increases entropy on exact joints") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        const auto j = random_joint({3, 3, 2, 4}, rng);
        const auto r = verify_monotonicity(j, {{}, {1}, {1, 2}, {1, 2, 3}});
        CHECK(r.monotone);
        CHECK(r.min_gap >= -1e-9);
        CHECK(r.entropies.size() == 4);
        CHECK(r.gaps.size() == 3);
    }
}

TEST_CASE("conditionally independent additions carry no information") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        const auto j = conditionally_independent_joint(3, rng);
        const auto r = verify_monotonicity(j, {{1}, {1, 2}});
        CHECK(std::abs(r.gaps[0]) <= 1e-9);
    }
}

TEST_CASE("XOR: a variable useless alone is informative jointly") {
    // w = x1 xor x2 with fair independent inputs.
    DiscreteJoint j{{2, 2, 2}, std::vector<double>(8, 0.0)};
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) j.p[static_cast<std::size_t>(((a ^ b) * 2 + a) * 2 + b)] = 0.25;
    CHECK(cond_entropy(j, {1}) == doctest::Approx(std::log(2.0)));
    const auto r = verify_monotonicity(j, {{1}, {1, 2}});
    CHECK(r.gaps[0] == doctest::Approx(std::log(2.0)));
}

TEST_CASE("invalid inputs") {
    DiscreteJoint bad{{2, 2}, {0.5, 0.5, 0.5, 0.5}};
    CHECK_THROWS_AS(bad.validate(), DataError);
    CHECK_THROWS_AS(cond_entropy(bad, {1}), DataError);
    DiscreteJoint ok{{2, 2}, std::vector<double>(4, 0.25)};
    CHECK_THROWS_AS(verify_monotonicity(ok, {{1}, {1}}), DataError);
    CHECK_THROWS_AS(verify_monotonicity(ok, {{1}}), DataError);
    CHECK_THROWS_AS(cond_entropy(ok, {0}), DataError);
    GaussianSystem notpd{{0, 0}, {1, 2, 2, 1}};
    CHECK_THROWS_AS(notpd.validate(), DataError);
}

TEST_CASE("Gaussian closed forms") {
    GaussianSystem unit{{0}, {1}};
    CHECK(gaussian_cond_entropy(unit, {}) == doctest::Approx(0.5 * std::log(2 * std::numbers::pi * std::numbers::e)));
    CHECK(gaussian_cond_entropy(unit, {}) == doctest::Approx(1.41894).epsilon(1e-5));

    // Var(w | x) = 1 - rho^2 for unit variances.
    const double rho = 0.6;
    GaussianSystem pair{{0, 0}, {1, rho, rho, 1}};
    CHECK(gaussian_cond_variance(pair, {1}) == doctest::Approx(1 - rho * rho));

    GaussianSystem exact{{0, 0}, {1, 1, 1, 1 + 1e-300}};
    CHECK_THROWS(gaussian_cond_variance(exact, {1}));

    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 30; ++trial) {
        const auto g = random_gaussian(5, rng);
        double prev = gaussian_cond_entropy(g, {});
        std::vector<int> s;
        for (int v : {3, 1, 4, 2}) {
            s.push_back(v);
            const double h = gaussian_cond_entropy(g, s);
            CHECK(h <= prev + 1e-12);
            prev = h;
        }
    }
}

TEST_CASE("quantile binning and empirical joints") {
    std::vector<double> v;
    for (int i = 0; i < 100; ++i) v.push_back(static_cast<double>((i * 37) % 100));
    const auto bins = quantile_bins(v, 4);
    std::vector<int> count(4, 0);
    for (int b : bins) ++count[static_cast<std::size_t>(b)];
    for (int c : count) CHECK(c == 25);
    CHECK(bins[0] == 0);  // value 0

    const auto j = empirical_joint({{0, 1, 1, 0}, {0, 1, 1, 1}}, {2, 2});
    CHECK(j.p == std::vector<double>{0.25, 0.25, 0.0, 0.5});
    CHECK_THROWS_AS(empirical_joint({{0, 2}, {0, 1}}, {2, 2}), DataError);
}

TEST_CASE("entropy suite on a reduced budget") {
    EntropySuiteOptions o;
    o.trials = 10;
    o.independence_trials = 3;
    o.samples = 5000;
    o.seed = 5;
    const auto r = run_entropy_suite(o);
    CHECK(r.discrete.passed == 10);
    CHECK(r.independence.passed == 3);
    CHECK(r.gaussian.passed == 10);
    CHECK(r.plugin.trials == 10);
    CHECK(r.plugin_mean_information > 0);
    const auto j = r.to_json();
    CHECK(j.contains("plugin"));
    // Same seed, same report.
    CHECK(run_entropy_suite(o).to_json() == j);
}
