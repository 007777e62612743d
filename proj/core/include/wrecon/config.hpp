#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "wrecon/model.hpp"
#include "wrecon/pipeline.hpp"
#include "wrecon/trainer.hpp"

namespace wrecon {

// JSON forms of the individual configuration blocks. Readers reject unknown
// keys and wrongly typed values with ConfigError; missing keys keep defaults.
nlohmann::json to_json(const SynthConfig& c);
nlohmann::json to_json(const ModelConfig& c);
nlohmann::json to_json(const SubsetPolicy& p);
nlohmann::json to_json(const TrainConfig& c);

SynthConfig synth_config_from_json(const nlohmann::json& j, SynthConfig base = {});
ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig base = {});
SubsetPolicy policy_from_json(const nlohmann::json& j, SubsetPolicy base = {});
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

struct DatasetSection {
    SynthConfig synth;  // steps and seed are derived, not read
    int t_train = 512;
    int t_val = 64;
    int t_test = 128;
};

struct EvalSection {
    std::vector<std::string> masks{"SSH", "SSH+U+V", "SSH+U+V+B"};
    std::string split = "test";
    std::vector<std::string> variants{"full", "no_scp", "no_gsao"};
};

struct PathsSection {
    std::string data = "data";
    std::string out = "runs/default";
};

/// Whole-run configuration. One master seed drives everything:
/// generator = seed, model init and batch order = seed + 1, masks = seed + 2.
struct RunConfig {
    std::uint64_t seed = 7;
    DatasetSection dataset;
    ModelConfig model;
    SubsetPolicy policy;
    TrainConfig train;
    EvalSection eval;
    PathsSection paths;

    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig load(const std::filesystem::path& file);
    /// Effective configuration with every default filled in.
    nlohmann::json to_json() const;

    /// Pushes the master seed, split sizes and universe into the sub-configs.
    void derive();
    /// Cross-section checks, e.g. grid divisible by 2^stages.
    void validate() const;

    SynthConfig synth() const;
};

}  // namespace wrecon
