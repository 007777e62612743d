#include "wrecon/datastore.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "wrecon/errors.hpp"

namespace wrecon {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

static_assert(sizeof(float) == 4, "float32 storage assumed");

void write_floats(std::ofstream& out, const float* data, std::size_t n) {
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * 4));
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            std::uint32_t v = std::bit_cast<std::uint32_t>(data[i]);
            v = (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
            out.write(reinterpret_cast<const char*>(&v), 4);
        }
    }
}

void read_floats(std::ifstream& in, float* data, std::size_t n) {
    in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * 4));
    if constexpr (std::endian::native != std::endian::little) {
        for (std::size_t i = 0; i < n; ++i) {
            std::uint32_t v = std::bit_cast<std::uint32_t>(data[i]);
            v = (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
            data[i] = std::bit_cast<float>(v);
        }
    }
}

json read_json_file(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open " + file.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw DataError("malformed JSON in " + file.string() + ": " + e.what());
    }
}

void write_json_file(const fs::path& file, const json& j) {
    std::ofstream out(file);
    if (!out) throw IoError("cannot write " + file.string());
    out << j.dump(2) << "\n";
    if (!out) throw IoError("write failed for " + file.string());
}

void check_splits(const Splits& s, int total, bool require_cover) {
    std::set<int> seen;
    for (const auto* part : {&s.train, &s.val, &s.test}) {
        for (int i : *part) {
            if (i < 0 || i >= total)
                throw DataError("split index " + std::to_string(i) + " outside [0, " + std::to_string(total) + ")");
            if (!seen.insert(i).second) throw DataError("splits overlap at index " + std::to_string(i));
        }
    }
    if (require_cover && static_cast<int>(seen.size()) != total)
        throw DataError("splits must partition all " + std::to_string(total) + " samples");
}

}  // namespace

VariableUniverse::VariableUniverse(std::vector<std::string> names) : names_(std::move(names)) {
    if (names_.empty()) throw ConfigError("variable universe must contain at least one variable");
    std::set<std::string> uniq(names_.begin(), names_.end());
    if (uniq.size() != names_.size()) throw ConfigError("variable universe has duplicate names");
}

int VariableUniverse::index_of(const std::string& name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) throw DataError("variable '" + name + "' is not in the universe");
    return static_cast<int>(it - names_.begin());
}

bool VariableUniverse::contains(const std::string& name) const {
    return std::find(names_.begin(), names_.end(), name) != names_.end();
}

AvailabilityMask AvailabilityMask::from_names(const VariableUniverse& u, std::span<const std::string> names) {
    AvailabilityMask m(std::vector<bool>(static_cast<std::size_t>(u.size()), false));
    for (const auto& n : names) m.set(u.index_of(n));
    return m;
}

AvailabilityMask AvailabilityMask::parse(const VariableUniverse& u, const std::string& spec) {
    std::vector<std::string> names;
    std::stringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, '+'))
        if (!tok.empty()) names.push_back(tok);
    if (names.empty()) throw ConfigError("empty mask specification '" + spec + "'");
    return from_names(u, names);
}

int AvailabilityMask::count() const {
    return static_cast<int>(std::count(bits_.begin(), bits_.end(), true));
}

std::vector<int> AvailabilityMask::present() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < bits_.size(); ++i)
        if (bits_[i]) out.push_back(static_cast<int>(i));
    return out;
}

std::string AvailabilityMask::to_string(const VariableUniverse& u) const {
    std::string s;
    for (int i : present()) {
        if (!s.empty()) s += "+";
        s += u.name(i);
    }
    return s.empty() ? "none" : s;
}

void FieldSample::validate() const {
    if (height <= 0 || width <= 0 || channels <= 0) throw DataError("sample has empty dimensions");
    const std::size_t n = plane();
    for (const auto& [name, grid] : surface) {
        if (grid.size() != n)
            throw DataError("field " + name + " has " + std::to_string(grid.size()) + " values, expected " +
                            std::to_string(n));
        for (float v : grid)
            if (!std::isfinite(v)) throw DataError("non-finite value in field " + name);
    }
    if (target.size() != n * static_cast<std::size_t>(channels))
        throw DataError("target has " + std::to_string(target.size()) + " values, expected " +
                        std::to_string(n * static_cast<std::size_t>(channels)));
    for (float v : target)
        if (!std::isfinite(v)) throw DataError("non-finite value in target");
}

const ChannelStats& NormStats::variable(const std::string& name) const {
    auto it = variables.find(name);
    if (it == variables.end()) throw DataError("no normalization statistics for variable " + name);
    return it->second;
}

DatasetManifest write_dataset(std::span<const FieldSample> samples, const Splits& splits,
                              const VariableUniverse& universe, const fs::path& dir, const std::string& provenance) {
    if (samples.empty()) throw DataError("write_dataset: no samples");
    const FieldSample& first = samples.front();
    for (const auto& s : samples) {
        s.validate();
        if (s.height != first.height || s.width != first.width || s.channels != first.channels)
            throw DataError("write_dataset: samples differ in shape");
        for (const auto& name : universe.names())
            if (!s.surface.contains(name)) throw DataError("write_dataset: sample lacks variable " + name);
    }
    check_splits(splits, static_cast<int>(samples.size()), true);
    if (splits.train.empty()) throw DataError("write_dataset: empty train split");

    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

    DatasetManifest m;
    m.universe = universe;
    m.height = first.height;
    m.width = first.width;
    m.channels = first.channels;
    m.samples = static_cast<int>(samples.size());
    m.splits = splits;
    m.provenance = provenance;
    m.root = dir;

    for (const auto& name : universe.names()) {
        m.files[name] = name + ".bin";
        std::ofstream out(dir / m.files[name], std::ios::binary);
        if (!out) throw IoError("cannot write " + (dir / m.files[name]).string());
        for (const auto& s : samples) write_floats(out, s.surface.at(name).data(), s.plane());
        if (!out) throw IoError("write failed for " + m.files[name]);
    }
    {
        std::ofstream out(dir / m.target_file, std::ios::binary);
        if (!out) throw IoError("cannot write " + (dir / m.target_file).string());
        for (const auto& s : samples) write_floats(out, s.target.data(), s.target.size());
        if (!out) throw IoError("write failed for " + m.target_file);
    }

    json files = json::object();
    for (const auto& [k, v] : m.files) files[k] = v;
    json j = {
        {"schema_version", m.schema_version},
        {"universe", universe.names()},
        {"H", m.height},
        {"W", m.width},
        {"C", m.channels},
        {"T", m.samples},
        {"T_train", m.t_train()},
        {"T_val", m.t_val()},
        {"T_test", m.t_test()},
        {"target_levels", m.target_levels},
        {"splits", {{"train", splits.train}, {"val", splits.val}, {"test", splits.test}}},
        {"files", files},
        {"target_file", m.target_file},
        {"stats_file", m.stats_file},
        {"layout", {{"dtype", "float32"}, {"endianness", "little"}, {"order", "row-major"},
                    {"variable_dims", {"T", "H", "W"}}, {"target_dims", {"T", "C", "H", "W"}}}},
        {"provenance", provenance},
    };
    write_json_file(dir / "manifest.json", j);
    write_norm_stats(compute_norm_stats(m), dir / m.stats_file);
    return m;
}

DatasetManifest read_manifest(const fs::path& dir) {
    const json j = read_json_file(dir / "manifest.json");
    DatasetManifest m;
    try {
        m.schema_version = j.at("schema_version").get<int>();
        if (m.schema_version != DatasetManifest::kSchemaVersion)
            throw DataError("manifest schema_version " + std::to_string(m.schema_version) + " unsupported (expected " +
                            std::to_string(DatasetManifest::kSchemaVersion) + ")");
        m.universe = VariableUniverse(j.at("universe").get<std::vector<std::string>>());
        m.height = j.at("H").get<int>();
        m.width = j.at("W").get<int>();
        m.channels = j.at("C").get<int>();
        m.samples = j.at("T").get<int>();
        m.target_levels = j.at("target_levels").get<std::vector<int>>();
        m.splits.train = j.at("splits").at("train").get<std::vector<int>>();
        m.splits.val = j.at("splits").at("val").get<std::vector<int>>();
        m.splits.test = j.at("splits").at("test").get<std::vector<int>>();
        m.files = j.at("files").get<std::map<std::string, std::string>>();
        m.target_file = j.at("target_file").get<std::string>();
        m.stats_file = j.at("stats_file").get<std::string>();
        m.provenance = j.value("provenance", "");
    } catch (const json::exception& e) {
        throw DataError("malformed manifest in " + dir.string() + ": " + e.what());
    }
    m.root = dir;
    if (m.height <= 0 || m.width <= 0 || m.channels <= 0 || m.samples <= 0)
        throw DataError("manifest declares empty dimensions");
    check_splits(m.splits, m.samples, false);

    const auto expect = [&](const std::string& file, std::uintmax_t bytes) {
        std::error_code ec;
        const auto size = fs::file_size(dir / file, ec);
        if (ec) throw DataError("missing dataset file " + (dir / file).string());
        if (size != bytes)
            throw DataError(file + " has " + std::to_string(size) + " bytes, expected " + std::to_string(bytes));
    };
    const std::uintmax_t plane = 4ull * static_cast<std::uintmax_t>(m.height) * static_cast<std::uintmax_t>(m.width);
    for (const auto& name : m.universe.names()) {
        if (!m.files.contains(name)) throw DataError("manifest lists no file for variable " + name);
        expect(m.files.at(name), plane * static_cast<std::uintmax_t>(m.samples));
    }
    expect(m.target_file, plane * static_cast<std::uintmax_t>(m.samples) * static_cast<std::uintmax_t>(m.channels));
    return m;
}

FieldSample read_sample(const DatasetManifest& m, int index) {
    if (index < 0 || index >= m.samples) throw DataError("sample index " + std::to_string(index) + " out of range");
    FieldSample s;
    s.height = m.height;
    s.width = m.width;
    s.channels = m.channels;
    s.time_index = index;
    const std::size_t n = s.plane();
    for (const auto& name : m.universe.names()) {
        std::ifstream in(m.root / m.files.at(name), std::ios::binary);
        if (!in) throw IoError("cannot open " + (m.root / m.files.at(name)).string());
        in.seekg(static_cast<std::streamoff>(4 * n * static_cast<std::size_t>(index)));
        auto& grid = s.surface[name];
        grid.resize(n);
        read_floats(in, grid.data(), n);
        if (!in) throw DataError("short read in " + m.files.at(name));
    }
    std::ifstream in(m.root / m.target_file, std::ios::binary);
    if (!in) throw IoError("cannot open " + (m.root / m.target_file).string());
    const std::size_t tn = n * static_cast<std::size_t>(m.channels);
    in.seekg(static_cast<std::streamoff>(4 * tn * static_cast<std::size_t>(index)));
    s.target.resize(tn);
    read_floats(in, s.target.data(), tn);
    if (!in) throw DataError("short read in " + m.target_file);
    return s;
}

NormStats compute_norm_stats(const DatasetManifest& m) {
    if (m.splits.train.empty()) throw DataError("cannot compute statistics: empty train split");
    const std::size_t names = static_cast<std::size_t>(m.universe.size());
    std::vector<double> sum(names + static_cast<std::size_t>(m.channels), 0.0);
    std::vector<double> count(sum.size(), 0.0);
    std::vector<std::vector<float>> cache;
    std::vector<FieldSample> train;
    train.reserve(m.splits.train.size());
    for (int idx : m.splits.train) train.push_back(read_sample(m, idx));

    const auto channel = [&](const FieldSample& s, std::size_t k) -> std::span<const float> {
        if (k < names) return s.surface.at(m.universe.name(static_cast<int>(k)));
        const std::size_t c = k - names;
        return std::span<const float>(s.target).subspan(c * s.plane(), s.plane());
    };
    // two passes keep the variance well conditioned for tiny-magnitude targets
    for (const auto& s : train)
        for (std::size_t k = 0; k < sum.size(); ++k)
            for (float v : channel(s, k)) {
                sum[k] += v;
                count[k] += 1;
            }
    std::vector<double> mean(sum.size());
    for (std::size_t k = 0; k < sum.size(); ++k) mean[k] = sum[k] / count[k];
    std::vector<double> sq(sum.size(), 0.0);
    for (const auto& s : train)
        for (std::size_t k = 0; k < sum.size(); ++k)
            for (float v : channel(s, k)) {
                const double d = v - mean[k];
                sq[k] += d * d;
            }
    NormStats stats;
    for (std::size_t k = 0; k < sum.size(); ++k) {
        const ChannelStats cs{mean[k], std::max(std::sqrt(sq[k] / count[k]), NormStats::kStdFloor)};
        if (k < names)
            stats.variables[m.universe.name(static_cast<int>(k))] = cs;
        else
            stats.target.push_back(cs);
    }
    return stats;
}

void write_norm_stats(const NormStats& stats, const fs::path& file) {
    json vars = json::object();
    for (const auto& [name, cs] : stats.variables) vars[name] = {{"mean", cs.mean}, {"std", cs.std}};
    json target = json::array();
    for (const auto& cs : stats.target) target.push_back({{"mean", cs.mean}, {"std", cs.std}});
    write_json_file(file, {{"variables", vars}, {"target", target}, {"std_floor", NormStats::kStdFloor}});
}

NormStats read_norm_stats(const fs::path& file) {
    const json j = read_json_file(file);
    NormStats s;
    try {
        for (const auto& [name, v] : j.at("variables").items())
            s.variables[name] = {v.at("mean").get<double>(), v.at("std").get<double>()};
        for (const auto& v : j.at("target")) s.target.push_back({v.at("mean").get<double>(), v.at("std").get<double>()});
    } catch (const json::exception& e) {
        throw DataError("malformed statistics file " + file.string() + ": " + e.what());
    }
    for (const auto& [name, cs] : s.variables)
        if (!(cs.std > 0)) throw DataError("non-positive std for " + name);
    for (const auto& cs : s.target)
        if (!(cs.std > 0)) throw DataError("non-positive std for target channel");
    return s;
}

namespace {

FieldSample apply_affine(const FieldSample& in, const NormStats& stats, bool forward) {
    if (stats.target.size() != static_cast<std::size_t>(in.channels))
        throw DataError("statistics cover " + std::to_string(stats.target.size()) + " target channels, sample has " +
                        std::to_string(in.channels));
    FieldSample out = in;
    const auto map = [forward](std::span<float> xs, const ChannelStats& cs) {
        for (auto& x : xs) {
            const double v = forward ? (x - cs.mean) / cs.std : x * cs.std + cs.mean;
            x = static_cast<float>(v);
        }
    };
    for (auto& [name, grid] : out.surface) map(grid, stats.variable(name));
    for (int c = 0; c < in.channels; ++c)
        map(std::span<float>(out.target).subspan(static_cast<std::size_t>(c) * in.plane(), in.plane()),
            stats.target[static_cast<std::size_t>(c)]);
    return out;
}

}  // namespace

FieldSample normalize(const FieldSample& sample, const NormStats& stats) { return apply_affine(sample, stats, true); }

FieldSample denormalize(const FieldSample& sample, const NormStats& stats) {
    return apply_affine(sample, stats, false);
}

Dataset Dataset::load(const fs::path& dir) {
    Dataset d;
    d.manifest = read_manifest(dir);
    d.stats = read_norm_stats(dir / d.manifest.stats_file);
    d.samples.reserve(static_cast<std::size_t>(d.manifest.samples));
    for (int i = 0; i < d.manifest.samples; ++i) d.samples.push_back(read_sample(d.manifest, i));
    return d;
}

const std::vector<int>& Dataset::split(const std::string& name) const {
    if (name == "train") return manifest.splits.train;
    if (name == "val") return manifest.splits.val;
    if (name == "test") return manifest.splits.test;
    throw ConfigError("unknown split '" + name + "'");
}

}  // namespace wrecon
