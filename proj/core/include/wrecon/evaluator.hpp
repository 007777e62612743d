#pragma once

#include <functional>
#include <nlohmann/json.hpp>
#include <ostream>
#include <string>
#include <vector>

#include "wrecon/checkpoint.hpp"
#include "wrecon/datastore.hpp"
#include "wrecon/model.hpp"
#include "wrecon/trainer.hpp"

namespace wrecon {

struct DepthMetrics {
    int level = 0;  // metres
    double rmse = 0;
    double mae = 0;
    double pcc = 0;  // NaN when every sample is degenerate
    int pcc_skipped = 0;

    bool operator==(const DepthMetrics&) const = default;
};

/// Metrics in physical units (m/s) for one mask over one split.
struct MetricsReport {
    std::string mask;
    std::string model_id;
    std::string split;
    int samples = 0;
    std::vector<DepthMetrics> depths;

    nlohmann::json to_json() const;
    double mean_rmse() const;
    bool operator==(const MetricsReport&) const = default;
};

/// Maps a normalized sample and mask to a normalized [C, H, W] prediction.
using Predictor = std::function<Tensor<float>(const FieldSample&, const AvailabilityMask&)>;

Predictor model_predictor(Model<float>& model, const VariableUniverse& universe);
/// Always predicts the training mean, i.e. zero in normalized units.
Predictor climatology_predictor();

/// Runs the predictor over a split, denormalizes and scores every depth.
MetricsReport evaluate_predictor(const Dataset& data, const Predictor& predict, const AvailabilityMask& mask,
                                 const std::string& split = "test", const std::string& model_id = {});

MetricsReport evaluate(Model<float>& model, const Dataset& data, const AvailabilityMask& mask,
                       const std::string& split = "test", const std::string& model_id = {});

struct SweepResult {
    std::vector<MetricsReport> reports;  // one per mask, in family order

    nlohmann::json to_json() const;
};

/// Default family of nested observation scenarios.
std::vector<std::string> default_family();

SweepResult sweep_subsets(Model<float>& model, const Dataset& data, const std::vector<AvailabilityMask>& family,
                          const std::string& split = "test", const std::string& model_id = {});

/// One CSV row per mask x depth. `variant` adds a leading variant column when non-empty.
std::string metrics_csv_header(bool with_variant);
std::string metrics_csv_rows(const std::vector<MetricsReport>& reports, const std::string& variant = {});

struct AblationEntry {
    Variant variant = Variant::full;
    std::size_t parameters = 0;
    std::vector<MetricsReport> reports;  // one per scenario
};

struct AblationResult {
    std::vector<AblationEntry> entries;

    nlohmann::json to_json() const;
    std::string csv() const;
};

/// Throws ConfigError unless the checkpoints agree on everything (model,
/// training and policy configuration, universe) except the model variant.
void check_ablation_compatible(const std::vector<Checkpoint>& checkpoints);

/// Scores already trained variants on the given scenarios.
AblationResult ablate(const std::vector<Checkpoint>& checkpoints, const Dataset& data,
                      const std::vector<AvailabilityMask>& scenarios, const std::string& split = "test");

/// Trains every variant with identical seeds and configuration, then scores them.
/// Checkpoints go to out_dir/<variant>/ when out_dir is set.
AblationResult train_and_ablate(const Dataset& data, const ModelConfig& base, const std::vector<Variant>& variants,
                                const SubsetPolicy& policy, const TrainConfig& tcfg,
                                const std::vector<AvailabilityMask>& scenarios, const std::string& split = "test",
                                const std::filesystem::path& out_dir = {}, std::ostream* log = nullptr);

/// Prediction, target and error grids in physical units for one sample, for heatmaps.
nlohmann::json dump_fields(Model<float>& model, const Dataset& data, const AvailabilityMask& mask,
                           const std::string& split = "test", int position = 0);

}  // namespace wrecon
