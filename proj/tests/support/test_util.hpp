#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>

#include "wrecon/datastore.hpp"
#include "wrecon/model.hpp"
#include "wrecon/pipeline.hpp"

namespace testutil {

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("wrecon-" + tag + "-" + std::to_string(rd()));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

private:
    std::filesystem::path path_;
};

/// Random sample over the standard universe.
inline wrecon::FieldSample random_sample(int h, int w, int t, std::mt19937_64& rng) {
    std::normal_distribution<float> n(0.0f, 1.0f);
    wrecon::FieldSample s;
    s.height = h;
    s.width = w;
    s.time_index = t;
    for (const auto& name : wrecon::VariableUniverse::standard_names()) {
        auto& g = s.surface[name];
        g.resize(static_cast<std::size_t>(h) * w);
        for (auto& v : g) v = n(rng);
    }
    s.target.resize(static_cast<std::size_t>(3) * h * w);
    for (auto& v : s.target) v = n(rng);
    return s;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

/// Small synthetic dataset written to `dir` and loaded back.
inline wrecon::Dataset tiny_dataset(const std::filesystem::path& dir, int size, int train, int val, int test,
                                    std::uint64_t seed = 3) {
    wrecon::SynthConfig c;
    c.height = size;
    c.width = size;
    c.steps = train + val + test;
    c.seed = seed;
    c.max_wavenumber = std::max(1, size / 4);
    c.eddy_radius = 2.0;
    const auto out = wrecon::generate_synthetic(c);
    wrecon::write_dataset(out.samples, wrecon::contiguous_splits(train, val, test), wrecon::VariableUniverse(), dir);
    return wrecon::Dataset::load(dir);
}

/// A model small enough for unit tests.
inline wrecon::ModelConfig tiny_model(int stages = 2) {
    wrecon::ModelConfig m;
    m.embedder.channels = 4;
    m.embedder.codebook_size = 3;
    m.embedder.template_h = 4;
    m.embedder.template_w = 4;
    m.embedder.mixer_hidden = 8;
    m.backbone.stages = stages;
    m.backbone.branch_kernels = {3, 5};
    return m;
}

}  // namespace testutil
