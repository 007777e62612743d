#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "test_util.hpp"
#include "wrecon/errors.hpp"
#include "wrecon/evaluator.hpp"
#include "wrecon/metrics.hpp"
#include "wrecon/trainer.hpp"

using namespace wrecon;
using testutil::TempDir;

namespace {

std::vector<double> flatten(const std::vector<std::vector<double>>& v) {
    std::vector<double> out;
    for (const auto& r : v) out.insert(out.end(), r.begin(), r.end());
    return out;
}

}  // namespace

TEST_CASE("metric hand values") {
    const std::vector<double> p{1, 2}, t{2, 4};
    CHECK(rmse(p, t, 1) == doctest::Approx(std::sqrt(2.5)));
    CHECK(mae(p, t, 1) == doctest::Approx(1.5));
    const std::vector<double> zero{0, 0};
    CHECK(rmse(t, t, 1) == 0.0);
    CHECK(mae(zero, zero, 2) == 0.0);
}

TEST_CASE("metrics average per sample, not pooled") {
    // Sample errors 1 and 3: per-sample mean 2, pooled sqrt(5).
    const std::vector<double> p{1, 3}, t{0, 0};
    CHECK(rmse(p, t, 2) == doctest::Approx(2.0));
    CHECK(rmse(p, t, 1) == doctest::Approx(std::sqrt(5.0)));
}

TEST_CASE("correlation of affine maps") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0, 1);
    std::vector<double> t(50), up(50), down(50);
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = n(rng);
        up[i] = 3 * t[i] + 7;
        down[i] = -0.5 * t[i] + 1;
    }
    CHECK(pcc(up, t, 1).value == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(pcc(down, t, 1).value == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(pcc(up, t, 1).value <= 1.0);
}

TEST_CASE("degenerate correlation samples are skipped") {
    const std::vector<double> p{1, 1, 1, 2, 3, 4}, t{1, 2, 3, 1, 2, 3};
    const auto r = pcc(p, t, 2);
    CHECK(r.skipped == 1);
    CHECK(r.value == doctest::Approx(1.0));
    const std::vector<double> flat{5, 5, 5};
    CHECK_THROWS_AS(pcc(flat, std::vector<double>{1, 2, 3}, 1), DataError);
}

TEST_CASE("metric input validation") {
    const std::vector<double> a{1, 2, 3}, b{1, 2};
    CHECK_THROWS_AS(rmse(a, b, 1), DataError);
    CHECK_THROWS_AS(rmse(std::vector<double>{}, std::vector<double>{}, 1), DataError);
    CHECK_THROWS_AS(mae(a, a, 2), DataError);
}

TEST_CASE("metrics match the scalar-loop oracle on random batches") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n(0, 1);
    std::uniform_int_distribution<int> bdist(1, 6), mdist(2, 40);
    for (int trial = 0; trial < 50; ++trial) {
        const int b = bdist(rng), m = mdist(rng);
        std::vector<std::vector<double>> p(static_cast<std::size_t>(b)), t = p;
        for (int i = 0; i < b; ++i)
            for (int j = 0; j < m; ++j) {
                t[static_cast<std::size_t>(i)].push_back(n(rng));
                p[static_cast<std::size_t>(i)].push_back(0.7 * t[static_cast<std::size_t>(i)].back() + n(rng));
            }
        const auto fp = flatten(p), ft = flatten(t);
        CHECK(std::abs(rmse(fp, ft, b) - oracle::rmse(p, t)) <= 1e-10);
        CHECK(std::abs(mae(fp, ft, b) - oracle::mae(p, t)) <= 1e-10);
        CHECK(std::abs(pcc(fp, ft, b).value - oracle::pcc(p, t)) <= 1e-10);
    }
}

TEST_CASE("evaluation") {
    TempDir dir("eval");
    const Dataset ds = testutil::tiny_dataset(dir / "data", 16, 4, 1, 3);
    const VariableUniverse& u = ds.manifest.universe;
    const auto full = AvailabilityMask::full(4);

    SUBCASE("climatology predicts the training mean") {
        const auto r = evaluate_predictor(ds, climatology_predictor(), full, "test", "clim");
        REQUIRE(r.depths.size() == 3);
        CHECK(r.samples == 3);
        CHECK(r.model_id == "clim");
        for (std::size_t d = 0; d < 3; ++d) {
            std::vector<std::vector<double>> p, t;
            for (int idx : ds.split("test")) {
                const auto& s = ds.samples.at(static_cast<std::size_t>(idx));
                const std::size_t n = s.plane();
                t.emplace_back(s.target.begin() + static_cast<long>(d * n), s.target.begin() + static_cast<long>((d + 1) * n));
                p.emplace_back(n, static_cast<float>(ds.stats.target[d].mean));
            }
            CHECK(r.depths[d].rmse == doctest::Approx(oracle::rmse(p, t)).epsilon(1e-6));
            CHECK(std::isnan(r.depths[d].pcc));
            CHECK(r.depths[d].pcc_skipped == 3);
        }
        CHECK(r.to_json()["depths"][0]["pcc"].is_null());
    }

    SUBCASE("a perfect predictor scores zero error") {
        Predictor perfect = [&](const FieldSample& s, const AvailabilityMask&) {
            return target_tensor<float>(s);
        };
        const auto r = evaluate_predictor(ds, perfect, full);
        for (const auto& d : r.depths) {
            CHECK(d.rmse < 1e-9);
            CHECK(d.pcc == doctest::Approx(1.0));
        }
    }

    SUBCASE("non-finite predictions are rejected") {
        Predictor bad = [](const FieldSample& s, const AvailabilityMask&) {
            auto t = target_tensor<float>(s);
            t[0] = std::nanf("");
            return t;
        };
        CHECK_THROWS_AS(evaluate_predictor(ds, bad, full), NumericError);
    }

    SUBCASE("model evaluation is read-only and repeatable") {
        Model<float> m(testutil::tiny_model(), 3);
        const auto before = m.params().cast<float>();
        const auto mask = AvailabilityMask::parse(u, "SSH+U+V");
        const auto a = evaluate(m, ds, mask);
        const auto b = evaluate(m, ds, mask);
        CHECK(a == b);
        CHECK(a.mask == "SSH+U+V");
        for (std::size_t i = 0; i < before.size(); ++i)
            CHECK(before.value(static_cast<int>(i)).data == m.params().value(static_cast<int>(i)).data);
    }

    SUBCASE("sweep and CSV") {
        Model<float> m(testutil::tiny_model(), 3);
        std::vector<AvailabilityMask> fam;
        for (const auto& s : default_family()) fam.push_back(AvailabilityMask::parse(u, s));
        const auto sw = sweep_subsets(m, ds, fam);
        REQUIRE(sw.reports.size() == 3);
        CHECK(sw.reports[0].mask == "SSH");
        const std::string csv = metrics_csv_header(false) + metrics_csv_rows(sw.reports);
        int lines = 0;
        for (char c : csv) lines += c == '\n';
        CHECK(lines == 1 + 3 * 3);
        CHECK(csv.rfind("mask,depth_level,rmse,mae,pcc,pcc_skipped,samples\n", 0) == 0);
        CHECK(metrics_csv_rows(sw.reports, "full").rfind("full,SSH,20,", 0) == 0);
        CHECK_THROWS_AS(sweep_subsets(m, ds, {}), ConfigError);
        CHECK_THROWS_AS(sweep_subsets(m, ds, {fam[0], fam[0]}), ConfigError);
    }

    SUBCASE("field dump") {
        Model<float> m(testutil::tiny_model(), 3);
        const auto j = dump_fields(m, ds, full, "test", 1);
        CHECK(j["height"] == 16);
        REQUIRE(j["depths"].size() == 3);
        const auto& d0 = j["depths"][0];
        CHECK(d0["prediction"].size() == 16 * 16);
        CHECK(d0["error"][5].get<double>() ==
              doctest::Approx(d0["prediction"][5].get<double>() - d0["target"][5].get<double>()));
        CHECK_THROWS(dump_fields(m, ds, full, "test", 7));
    }
}

TEST_CASE("ablation compatibility") {
    TempDir dir("ablate");
    const Dataset ds = testutil::tiny_dataset(dir / "data", 16, 2, 0, 2);
    TrainConfig t;
    t.epochs = 1;
    t.batch_size = 2;
    t.lr = 1e-3;
    SubsetPolicy p;
    std::vector<AvailabilityMask> scenarios{AvailabilityMask::parse(ds.manifest.universe, "SSH"),
                                            AvailabilityMask::full(4)};
    const auto res = train_and_ablate(ds, testutil::tiny_model(), {Variant::full, Variant::no_scp, Variant::no_gsao},
                                      p, t, scenarios, "test", dir / "runs");
    REQUIRE(res.entries.size() == 3);
    CHECK(res.entries[1].parameters < res.entries[0].parameters);
    CHECK(res.entries[2].parameters < res.entries[0].parameters);
    CHECK(std::filesystem::exists(dir / "runs" / "no_scp" / "last.ckpt"));
    CHECK(res.to_json().size() == 3);

    std::vector<Checkpoint> cks{load_checkpoint(dir / "runs" / "full" / "last.ckpt"),
                                load_checkpoint(dir / "runs" / "no_scp" / "last.ckpt")};
    CHECK_NOTHROW(check_ablation_compatible(cks));
    const auto again = ablate(cks, ds, scenarios);
    CHECK(again.entries[0].reports == res.entries[0].reports);

    cks[1].config["train"]["lr"] = 0.5;
    try {
        check_ablation_compatible(cks);
        FAIL("expected a configuration error");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("train") != std::string::npos);
    }
}
