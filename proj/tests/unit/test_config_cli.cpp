#include <doctest.h>

#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "test_util.hpp"
#include "wrecon/config.hpp"
#include "wrecon/errors.hpp"

using namespace wrecon;
using nlohmann::json;
using testutil::TempDir;

namespace {

json tiny_config(const std::filesystem::path& root) {
    return {
        {"seed", 3},
        {"dataset", {{"height", 16}, {"width", 16}, {"max_wavenumber", 4}, {"eddy_radius", 2.0},
                     {"t_train", 4}, {"t_val", 2}, {"t_test", 2}}},
        {"model", {{"channels", 4}, {"codebook_size", 3}, {"template_size", 4}, {"mixer_hidden", 8},
                   {"stages", 2}, {"branch_kernels", {3, 5}}}},
        {"train", {{"epochs", 1}, {"batch_size", 2}, {"lr", 1e-3}}},
        {"paths", {{"data", (root / "data").string()}, {"out", (root / "run").string()}}},
    };
}

std::filesystem::path write_config(const TempDir& dir, const json& j, const std::string& name = "cfg.json") {
    const auto p = dir / name;
    std::ofstream(p) << j.dump(2);
    return p;
}

struct Result {
    int code;
    std::string out, err;
};

Result run_cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

}  // namespace

TEST_CASE("configuration parsing") {
    SUBCASE("defaults validate") {
        RunConfig rc = RunConfig::from_json(json::object());
        rc.derive();
        CHECK_NOTHROW(rc.validate());
        CHECK(rc.dataset.synth.height == 64);
        CHECK(rc.model.embedder.num_vars == 4);
    }
    SUBCASE("unknown keys are named") {
        try {
            RunConfig::from_json({{"model", {{"chanels", 4}}}});
            FAIL("expected a configuration error");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("model.chanels") != std::string::npos);
        }
    }
    SUBCASE("wrong types are rejected") {
        CHECK_THROWS_AS(RunConfig::from_json({{"train", {{"epochs", "ten"}}}}), ConfigError);
        CHECK_THROWS_AS(RunConfig::from_json({{"train", {{"epochs", 1.5}}}}), ConfigError);
        CHECK_THROWS_AS(RunConfig::from_json({{"seed", -1}}), ConfigError);
    }
    SUBCASE("derived fields cannot be set") {
        CHECK_THROWS_AS(RunConfig::from_json({{"train", {{"seed", 1}}}}), ConfigError);
    }
    SUBCASE("spatial size must suit the backbone depth") {
        RunConfig rc = RunConfig::from_json({{"dataset", {{"height", 50}}}});
        rc.derive();
        try {
            rc.validate();
            FAIL("expected a configuration error");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("divisible") != std::string::npos);
        }
    }
    SUBCASE("round trip through JSON") {
        RunConfig rc = RunConfig::from_json(tiny_config("/tmp/x"));
        const RunConfig back = RunConfig::from_json(rc.to_json());
        CHECK(back.to_json() == rc.to_json());
    }
    SUBCASE("seed derivation") {
        RunConfig rc = RunConfig::from_json({{"seed", 11}});
        rc.derive();
        CHECK(rc.synth().seed == 11);
        CHECK(rc.train.seed == 12);
        CHECK(rc.policy.seed == 13);
    }
}

TEST_CASE("command line") {
    TempDir dir("cli");
    const auto cfg = write_config(dir, tiny_config(dir.path())).string();

    SUBCASE("usage errors exit with 2") {
        CHECK(run_cli({}).code == 2);
        CHECK(run_cli({"frobnicate"}).code == 2);
        CHECK(run_cli({"gen", "--config", (dir / "missing.json").string()}).code == 5);
    }

    SUBCASE("an unsuitable grid size is a configuration error") {
        auto j = tiny_config(dir.path());
        j["dataset"]["height"] = 50;
        const auto r = run_cli({"gen", "--config", write_config(dir, j, "bad.json").string()});
        CHECK(r.code == 2);
        CHECK(r.err.find("divisible") != std::string::npos);
        CHECK_FALSE(std::filesystem::exists(dir / "data"));
    }

    SUBCASE("gen is deterministic") {
        REQUIRE(run_cli({"gen", "--config", cfg, "--out", (dir / "a").string()}).code == 0);
        REQUIRE(run_cli({"gen", "--config", cfg, "--out", (dir / "b").string()}).code == 0);
        for (const auto& e : std::filesystem::directory_iterator(dir / "a")) {
            const auto name = e.path().filename();
            CHECK(testutil::read_file(e.path()) == testutil::read_file(dir / "b" / name));
        }
        REQUIRE(run_cli({"gen", "--config", cfg, "--seed", "4", "--out", (dir / "c").string()}).code == 0);
        CHECK(testutil::read_file(dir / "a" / "target.bin") != testutil::read_file(dir / "c" / "target.bin"));
    }

    SUBCASE("train, eval, sweep and plot") {
        REQUIRE(run_cli({"gen", "--config", cfg}).code == 0);
        const auto tr = run_cli({"train", "--config", cfg});
        INFO(tr.err);
        REQUIRE(tr.code == 0);
        CHECK(std::filesystem::exists(dir / "run" / "last.ckpt"));
        CHECK(std::filesystem::exists(dir / "run" / "config.json"));
        CHECK(std::filesystem::exists(dir / "run" / "train_log.jsonl"));

        REQUIRE(run_cli({"eval", "--config", cfg, "--masks", "SSH,SSH+U+V+B", "--dump-fields"}).code == 0);
        const auto metrics = json::parse(testutil::read_file(dir / "run" / "metrics.json"));
        CHECK(metrics.size() == 2);
        CHECK(std::filesystem::exists(dir / "run" / "fields.json"));

        REQUIRE(run_cli({"sweep", "--config", cfg}).code == 0);
        const std::string csv = testutil::read_file(dir / "run" / "sweep.csv");
        int lines = 0;
        for (char ch : csv) lines += ch == '\n';
        CHECK(lines == 1 + 3 * 3);

        const auto pl = run_cli({"plot", "--csv", (dir / "run" / "sweep.csv").string(), "--fields",
                                 (dir / "run" / "fields.json").string(), "--out", (dir / "plots").string()});
        REQUIRE(pl.code == 0);
        CHECK(std::filesystem::exists(dir / "plots" / "rmse.svg"));
        CHECK(std::filesystem::exists(dir / "plots" / "fields_20m.svg"));
        CHECK(testutil::read_file(dir / "plots" / "pcc.svg").find("<svg") != std::string::npos);

        CHECK(run_cli({"eval", "--config", cfg, "--masks", "SSH+W"}).code == 2);
        CHECK(run_cli({"eval", "--config", cfg, "--checkpoint", (dir / "nope.ckpt").string()}).code == 5);
    }

    SUBCASE("plot with an empty CSV writes nothing") {
        std::ofstream(dir / "empty.csv") << "";
        const auto r = run_cli({"plot", "--csv", (dir / "empty.csv").string(), "--out", (dir / "p").string()});
        CHECK(r.code == 3);
        CHECK_FALSE(std::filesystem::exists(dir / "p"));
        std::ofstream(dir / "header.csv") << "mask,depth_level,rmse,mae,pcc,pcc_skipped,samples\n";
        CHECK(run_cli({"plot", "--csv", (dir / "header.csv").string(), "--out", (dir / "p").string()}).code == 3);
        CHECK_FALSE(std::filesystem::exists(dir / "p"));
    }

    SUBCASE("entropy check") {
        const auto r = run_cli({"entropy-check", "--trials", "5", "--seed", "2", "--out", dir.path().string()});
        CHECK(r.code == 0);
        CHECK(r.out.find("PASS") != std::string::npos);
        CHECK(std::filesystem::exists(dir / "entropy_report.json"));
    }
}
