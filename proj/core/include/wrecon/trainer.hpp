#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "wrecon/checkpoint.hpp"
#include "wrecon/datastore.hpp"
#include "wrecon/model.hpp"

namespace wrecon {

/// How the availability mask of each training sample is drawn.
struct SubsetPolicy {
    enum class Mode { full_only, uniform_nonempty, curriculum_list };

    Mode mode = Mode::uniform_nonempty;
    double p_full = 0.5;
    std::vector<std::string> always_include{"SSH"};
    /// Mask specifications ("SSH+U") drawn uniformly in curriculum_list mode.
    std::vector<std::string> curriculum;
    std::uint64_t seed = 0;

    void validate(const VariableUniverse& universe) const;
};

std::string to_string(SubsetPolicy::Mode m);
SubsetPolicy::Mode parse_policy_mode(const std::string& s);

/// With probability p_full the full mask; otherwise each optional variable is
/// included independently with probability 1/2 (uniform over subsets) and
/// joined with always_include. Empty draws are redrawn.
AvailabilityMask sample_mask(const SubsetPolicy& policy, const VariableUniverse& universe, std::mt19937_64& rng);

struct TrainConfig {
    int epochs = 50;
    double lr = 1e-4;
    int batch_size = 8;
    double beta_loss = 1.0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    int checkpoint_every = 1;
    std::string lr_schedule = "constant";
    std::uint64_t seed = 0;

    void validate() const;
};

/// Adam with bias correction. State is kept in float alongside the parameters.
class Adam {
public:
    Adam() = default;
    Adam(const ParamStore<float>& params, double beta1, double beta2, double eps);

    void step(ParamStore<float>& params, double lr);

    std::int64_t steps() const { return step_; }
    std::vector<Tensor<float>>& first_moment() { return m_; }
    std::vector<Tensor<float>>& second_moment() { return v_; }
    const std::vector<Tensor<float>>& first_moment() const { return m_; }
    const std::vector<Tensor<float>>& second_moment() const { return v_; }
    void set_steps(std::int64_t s) { step_ = s; }

private:
    double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    std::int64_t step_ = 0;
    std::vector<Tensor<float>> m_, v_;
};

struct TrainOptions {
    std::filesystem::path out_dir;                 // empty: keep everything in memory
    std::optional<std::filesystem::path> resume;   // checkpoint to continue from
    std::optional<Checkpoint> resume_from;         // in-memory alternative to `resume`
    int stop_after_epoch = -1;                     // >= 0: stop once this many epochs are done
    std::ostream* log = nullptr;                   // human-readable progress
    /// Extra JSON echoed into checkpoints (e.g. the run configuration).
    nlohmann::json extra_config;
};

struct TrainResult {
    Checkpoint last;
    std::optional<Checkpoint> best;
    std::vector<double> step_losses;   // mean loss per optimizer step, this invocation only
    std::vector<EpochRecord> history;  // all epochs including resumed ones
};

/// Mean Smooth-L1 with threshold beta on plain tensors.
double smooth_l1(std::span<const float> pred, std::span<const float> target, double beta);

/// Subset-randomized training of the model in normalized units.
TrainResult train(const Dataset& data, const ModelConfig& model_cfg, const SubsetPolicy& policy,
                  const TrainConfig& tcfg, const TrainOptions& opts = {});

/// Rebuilds a float model from a checkpoint.
std::unique_ptr<Model<float>> model_from_checkpoint(const Checkpoint& ckpt);

}  // namespace wrecon
