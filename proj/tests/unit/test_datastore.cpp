#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>

#include "test_util.hpp"
#include "wrecon/datastore.hpp"
#include "wrecon/errors.hpp"

using namespace wrecon;
using testutil::TempDir;

namespace {

std::vector<FieldSample> samples(int n, int h, int w, std::uint64_t seed = 1) {
    std::mt19937_64 rng(seed);
    std::vector<FieldSample> out;
    for (int t = 0; t < n; ++t) out.push_back(testutil::random_sample(h, w, t, rng));
    return out;
}

}  // namespace

TEST_CASE("universe and masks") {
    VariableUniverse u;
    CHECK(u.size() == 4);
    CHECK(u.index_of("B") == 3);
    CHECK_THROWS_AS(u.index_of("SST"), DataError);
    CHECK_THROWS_AS(VariableUniverse({"SSH", "SSH"}), Error);
    CHECK_THROWS_AS(VariableUniverse(std::vector<std::string>{}), Error);

    const auto m = AvailabilityMask::parse(u, "SSH+V");
    CHECK(m.count() == 2);
    CHECK(m.test(0));
    CHECK(m.test(2));
    CHECK_FALSE(m.test(1));
    CHECK(m.to_string(u) == "SSH+V");
    CHECK(AvailabilityMask::full(4).to_string(u) == "SSH+U+V+B");
    CHECK_THROWS(AvailabilityMask::parse(u, "SSH+W"));
}

TEST_CASE("write_dataset counts splits") {
    TempDir dir("ds-count");
    const auto s = samples(4, 8, 8);
    const auto m = write_dataset(s, Splits{{0, 1}, {2}, {3}}, VariableUniverse(), dir.path());
    CHECK(m.t_train() == 2);
    CHECK(m.t_val() == 1);
    CHECK(m.t_test() == 1);
    const auto back = read_manifest(dir.path());
    CHECK(back.t_train() == 2);
    CHECK(back.height == 8);
    CHECK(back.universe == VariableUniverse());
}

TEST_CASE("round trip is bit-exact") {
    TempDir dir("ds-rt");
    const auto s = samples(3, 8, 16);
    write_dataset(s, Splits{{0, 1}, {2}, {}}, VariableUniverse(), dir.path());
    const auto m = read_manifest(dir.path());
    for (int t = 0; t < 3; ++t) {
        const auto r = read_sample(m, t);
        for (const auto& [name, grid] : s[static_cast<std::size_t>(t)].surface)
            CHECK(std::memcmp(grid.data(), r.surface.at(name).data(), grid.size() * 4) == 0);
        CHECK(std::memcmp(s[static_cast<std::size_t>(t)].target.data(), r.target.data(), r.target.size() * 4) == 0);
    }
}

TEST_CASE("byte layout of target and variable files") {
    TempDir dir("ds-bytes");
    const auto s = samples(1, 8, 8);
    const auto m = write_dataset(s, Splits{{0}, {}, {}}, VariableUniverse(), dir.path());
    CHECK(std::filesystem::file_size(dir / "target.bin") == 768);
    CHECK(std::filesystem::file_size(dir / m.files.at("SSH")) == 4 * 8 * 8);

    // First float of target.bin is channel 0, pixel (0,0), little-endian.
    const std::string bytes = testutil::read_file(dir / "target.bin");
    unsigned char b[4];
    std::memcpy(b, bytes.data(), 4);
    const std::uint32_t le = b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    float v;
    std::memcpy(&v, &le, 4);
    CHECK(v == s[0].target[0]);
}

TEST_CASE("write_dataset rejects bad input") {
    TempDir dir("ds-bad");
    auto s = samples(3, 8, 8);
    CHECK_THROWS_AS(write_dataset(s, Splits{{0, 1}, {1}, {2}}, VariableUniverse(), dir.path()), DataError);
    std::mt19937_64 rng(3);
    auto odd = s;
    odd[1] = testutil::random_sample(8, 4, 1, rng);
    CHECK_THROWS_AS(write_dataset(odd, Splits{{0, 1}, {2}, {}}, VariableUniverse(), dir.path()), DataError);
    auto nan = s;
    nan[0].surface["U"][5] = std::nanf("");
    CHECK_THROWS_AS(write_dataset(nan, Splits{{0, 1}, {2}, {}}, VariableUniverse(), dir.path()), DataError);
}

TEST_CASE("manifest validation catches truncated files") {
    TempDir dir("ds-trunc");
    const auto m = write_dataset(samples(2, 8, 8), Splits{{0}, {1}, {}}, VariableUniverse(), dir.path());
    std::filesystem::resize_file(dir / m.files.at("V"), 100);
    CHECK_THROWS_AS(read_manifest(dir.path()), DataError);
}

TEST_CASE("norm stats: constant field and two-valued field") {
    TempDir dir("ds-stats");
    std::vector<FieldSample> s = samples(2, 4, 4);
    for (auto& x : s) {
        std::fill(x.surface["SSH"].begin(), x.surface["SSH"].end(), 2.5f);
        for (std::size_t i = 0; i < x.surface["U"].size(); ++i) x.surface["U"][i] = (i % 2 == 0) ? -1.0f : 1.0f;
    }
    const auto m = write_dataset(s, Splits{{0, 1}, {}, {}}, VariableUniverse(), dir.path());
    const NormStats st = compute_norm_stats(m);
    CHECK(st.variable("SSH").mean == doctest::Approx(2.5));
    CHECK(st.variable("SSH").std == NormStats::kStdFloor);
    CHECK(st.variable("U").mean == doctest::Approx(0.0));
    CHECK(st.variable("U").std == doctest::Approx(1.0));
    const NormStats again = compute_norm_stats(m);
    CHECK(again.variable("V").mean == st.variable("V").mean);
    CHECK(again.variable("V").std == st.variable("V").std);
}

TEST_CASE("norm stats use the train split only") {
    TempDir a("ds-pure-a"), b("ds-pure-b");
    auto s = samples(3, 8, 8);
    const auto ma = write_dataset(s, Splits{{0, 1}, {}, {2}}, VariableUniverse(), a.path());
    for (auto& v : s[2].surface["B"]) v += 100.0f;
    for (auto& v : s[2].target) v *= 7.0f;
    const auto mb = write_dataset(s, Splits{{0, 1}, {}, {2}}, VariableUniverse(), b.path());
    const auto sa = compute_norm_stats(ma), sb = compute_norm_stats(mb);
    for (const auto& name : VariableUniverse::standard_names()) {
        CHECK(sa.variable(name).mean == sb.variable(name).mean);
        CHECK(sa.variable(name).std == sb.variable(name).std);
    }
    for (std::size_t c = 0; c < 3; ++c) CHECK(sa.target[c].mean == sb.target[c].mean);
}

TEST_CASE("normalize and denormalize") {
    TempDir dir("ds-norm");
    const auto s = samples(2, 8, 8);
    const auto m = write_dataset(s, Splits{{0, 1}, {}, {}}, VariableUniverse(), dir.path());
    const NormStats st = compute_norm_stats(m);

    FieldSample at_mean = s[0];
    for (auto& [name, g] : at_mean.surface) std::fill(g.begin(), g.end(), static_cast<float>(st.variable(name).mean));
    const auto z = normalize(at_mean, st);
    for (const auto& [name, g] : z.surface)
        for (float v : g) CHECK(v == doctest::Approx(0.0).epsilon(1e-6));

    FieldSample one_std = s[0];
    for (auto& [name, g] : one_std.surface)
        std::fill(g.begin(), g.end(), static_cast<float>(st.variable(name).mean + st.variable(name).std));
    for (const auto& [name, g] : normalize(one_std, st).surface)
        for (float v : g) CHECK(v == doctest::Approx(1.0).epsilon(1e-5));

    const auto back = denormalize(normalize(s[1], st), st);
    for (const auto& [name, g] : s[1].surface) {
        const auto& cs = st.variable(name);
        for (std::size_t i = 0; i < g.size(); ++i)
            CHECK(std::abs(back.surface.at(name)[i] - g[i]) <= 1e-6 * (std::abs(cs.mean) + cs.std) + 1e-7);
    }
}

TEST_CASE("stats file round trip and Dataset::load") {
    TempDir dir("ds-load");
    write_dataset(samples(4, 8, 8), Splits{{0, 1}, {2}, {3}}, VariableUniverse(), dir.path(), "unit-test");
    const Dataset ds = Dataset::load(dir.path());
    CHECK(ds.samples.size() == 4);
    CHECK(ds.split("val") == std::vector<int>{2});
    CHECK_THROWS(ds.split("holdout"));
    CHECK(ds.manifest.provenance == "unit-test");
    const NormStats st = read_norm_stats(dir / "stats.json");
    CHECK(st.variable("SSH").mean == ds.stats.variable("SSH").mean);
}
