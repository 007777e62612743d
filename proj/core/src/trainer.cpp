#include "wrecon/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "wrecon/config.hpp"
#include "wrecon/errors.hpp"
#include "wrecon/ops.hpp"

namespace wrecon {

using nlohmann::json;

std::string to_string(SubsetPolicy::Mode m) {
    switch (m) {
        case SubsetPolicy::Mode::full_only: return "full_only";
        case SubsetPolicy::Mode::uniform_nonempty: return "uniform_nonempty";
        case SubsetPolicy::Mode::curriculum_list: return "curriculum_list";
    }
    return "uniform_nonempty";
}

SubsetPolicy::Mode parse_policy_mode(const std::string& s) {
    if (s == "full_only") return SubsetPolicy::Mode::full_only;
    if (s == "uniform_nonempty") return SubsetPolicy::Mode::uniform_nonempty;
    if (s == "curriculum_list") return SubsetPolicy::Mode::curriculum_list;
    throw ConfigError("unknown policy mode '" + s + "' (expected full_only, uniform_nonempty or curriculum_list)");
}

void SubsetPolicy::validate(const VariableUniverse& universe) const {
    if (!(p_full >= 0.0 && p_full <= 1.0)) throw ConfigError("policy.p_full must lie in [0, 1]");
    for (const auto& name : always_include)
        if (!universe.contains(name)) throw ConfigError("policy.always_include names unknown variable '" + name + "'");
    if (mode == Mode::curriculum_list) {
        if (curriculum.empty()) throw ConfigError("policy.curriculum must list at least one mask in curriculum_list mode");
        for (const auto& spec : curriculum) {
            try {
                AvailabilityMask::parse(universe, spec);
            } catch (const DataError& e) {
                throw ConfigError(std::string("policy.curriculum: ") + e.what());
            }
        }
    }
}

AvailabilityMask sample_mask(const SubsetPolicy& policy, const VariableUniverse& universe, std::mt19937_64& rng) {
    const int n = universe.size();
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    switch (policy.mode) {
        case SubsetPolicy::Mode::full_only: return AvailabilityMask::full(n);
        case SubsetPolicy::Mode::curriculum_list: {
            std::uniform_int_distribution<std::size_t> pick(0, policy.curriculum.size() - 1);
            return AvailabilityMask::parse(universe, policy.curriculum[pick(rng)]);
        }
        case SubsetPolicy::Mode::uniform_nonempty: break;
    }
    if (unit(rng) < policy.p_full) return AvailabilityMask::full(n);
    AvailabilityMask base = AvailabilityMask::from_names(universe, policy.always_include);
    if (base.size() == 0) base = AvailabilityMask(std::vector<bool>(static_cast<std::size_t>(n), false));
    std::bernoulli_distribution coin(0.5);
    for (;;) {
        AvailabilityMask m = base;
        for (int i = 0; i < n; ++i)
            if (!m.test(i) && coin(rng)) m.set(i);
        if (m.any()) return m;
    }
}

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("train.lr must be a finite non-negative number");
    if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (!(beta_loss > 0)) throw ConfigError("train.beta_loss must be positive");
    if (!(adam_beta1 >= 0 && adam_beta1 < 1) || !(adam_beta2 >= 0 && adam_beta2 < 1))
        throw ConfigError("Adam moment coefficients must lie in [0, 1)");
    if (!(adam_eps > 0)) throw ConfigError("train.adam_eps must be positive");
    if (checkpoint_every < 1) throw ConfigError("train.checkpoint_every must be >= 1");
    if (lr_schedule != "constant") throw ConfigError("train.lr_schedule '" + lr_schedule + "' is not supported (constant)");
}

Adam::Adam(const ParamStore<float>& params, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        m_.emplace_back(params.value(static_cast<int>(i)).shape);
        v_.emplace_back(params.value(static_cast<int>(i)).shape);
    }
}

void Adam::step(ParamStore<float>& params, double lr) {
    ++step_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
    const float b1 = static_cast<float>(beta1_), b2 = static_cast<float>(beta2_);
    const float a = static_cast<float>(lr / c1);
    const float inv_c2 = static_cast<float>(1.0 / c2);
    const float eps = static_cast<float>(eps_);
    for (std::size_t p = 0; p < params.size(); ++p) {
        float* w = params.value(static_cast<int>(p)).ptr();
        const float* g = params.grad(static_cast<int>(p)).ptr();
        float* m = m_[p].ptr();
        float* v = v_[p].ptr();
        const std::size_t n = m_[p].size();
        for (std::size_t i = 0; i < n; ++i) {
            m[i] = b1 * m[i] + (1 - b1) * g[i];
            v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i];
            if (lr != 0.0) w[i] -= a * m[i] / (std::sqrt(v[i] * inv_c2) + eps);
        }
    }
}

double smooth_l1(std::span<const float> pred, std::span<const float> target, double beta) {
    if (pred.size() != target.size())
        throw DataError("smooth_l1: prediction has " + std::to_string(pred.size()) + " values, target " +
                        std::to_string(target.size()));
    if (pred.empty()) throw DataError("smooth_l1: empty input");
    double s = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = std::abs(static_cast<double>(pred[i]) - target[i]);
        s += d < beta ? 0.5 * d * d / beta : d - 0.5 * beta;
    }
    return s / static_cast<double>(pred.size());
}

std::unique_ptr<Model<float>> model_from_checkpoint(const Checkpoint& ckpt) {
    if (!ckpt.config.contains("model")) throw DataError("checkpoint carries no model configuration");
    ModelConfig cfg;
    try {
        cfg = model_config_from_json(ckpt.config.at("model"));
    } catch (const ConfigError& e) {
        throw DataError(std::string("checkpoint model configuration: ") + e.what());
    }
    auto model = std::make_unique<Model<float>>(cfg, 0);
    model->params().assign_from(ckpt.params);
    return model;
}

namespace {

struct Prepared {
    std::vector<FieldSample> train;
    std::vector<FieldSample> val;
};

std::string rng_state(const std::mt19937_64& data, const std::mt19937_64& mask) {
    std::ostringstream s;
    s << data << '|' << mask;
    return s.str();
}

void restore_rng(const std::string& state, std::mt19937_64& data, std::mt19937_64& mask) {
    const auto bar = state.find('|');
    if (bar == std::string::npos) throw DataError("checkpoint RNG state is malformed");
    std::istringstream a(state.substr(0, bar)), b(state.substr(bar + 1));
    a >> data;
    b >> mask;
    if (a.fail() || b.fail()) throw DataError("checkpoint RNG state is malformed");
}

class JsonlLog {
public:
    JsonlLog(const std::filesystem::path& dir, bool append) {
        if (dir.empty()) return;
        out_.open(dir / "train_log.jsonl", append ? std::ios::app : std::ios::trunc);
        if (!out_) throw IoError("cannot write " + (dir / "train_log.jsonl").string());
    }
    void record(int epoch, const char* split, double loss, double wall) {
        if (!out_.is_open()) return;
        out_ << json{{"epoch", epoch}, {"split", split}, {"loss", loss}, {"wall_time", wall}}.dump() << "\n";
        out_.flush();
    }

private:
    std::ofstream out_;
};

double validation_loss(Model<float>& model, const std::vector<FieldSample>& val, const VariableUniverse& universe,
                       const SubsetPolicy& policy, double beta) {
    if (val.empty()) return std::numeric_limits<double>::quiet_NaN();
    // Fixed masks, identical for every epoch.
    std::seed_seq seq{static_cast<std::uint32_t>(policy.seed), static_cast<std::uint32_t>(policy.seed >> 32), 0x76616cu};
    std::mt19937_64 rng(seq);
    double total = 0;
    for (const auto& s : val) {
        const AvailabilityMask mask = sample_mask(policy, universe, rng);
        const Tensor<float> pred = model.predict(gather_inputs<float>(s, universe, mask), mask);
        total += smooth_l1(pred.data, s.target, beta);
    }
    return total / static_cast<double>(val.size());
}

}  // namespace

TrainResult train(const Dataset& data, const ModelConfig& model_cfg_in, const SubsetPolicy& policy,
                  const TrainConfig& tcfg, const TrainOptions& opts) {
    tcfg.validate();
    const VariableUniverse& universe = data.manifest.universe;
    policy.validate(universe);
    ModelConfig model_cfg = model_cfg_in;
    if (model_cfg.embedder.num_vars != universe.size())
        throw ConfigError("model expects " + std::to_string(model_cfg.embedder.num_vars) + " variables, dataset has " +
                          std::to_string(universe.size()));
    if (model_cfg.backbone.out_channels != data.manifest.channels)
        throw ConfigError("model predicts " + std::to_string(model_cfg.backbone.out_channels) +
                          " depth levels, dataset has " + std::to_string(data.manifest.channels));
    model_cfg.validate();
    model_cfg.resolved().backbone.check_spatial(data.manifest.height, data.manifest.width);
    if (data.split("train").empty()) throw DataError("training split is empty");

    Prepared prep;
    for (int t : data.split("train")) prep.train.push_back(normalize(data.samples.at(static_cast<std::size_t>(t)), data.stats));
    for (int t : data.split("val")) prep.val.push_back(normalize(data.samples.at(static_cast<std::size_t>(t)), data.stats));

    Model<float> model(model_cfg, tcfg.seed);
    auto& params = model.params();
    Adam adam(params, tcfg.adam_beta1, tcfg.adam_beta2, tcfg.adam_eps);
    std::mt19937_64 data_rng(tcfg.seed);
    std::mt19937_64 mask_rng(policy.seed);

    json config = {{"model", to_json(model_cfg)},
                   {"train", to_json(tcfg)},
                   {"policy", to_json(policy)},
                   {"universe", universe.names()}};
    if (!opts.extra_config.is_null()) config["run"] = opts.extra_config;

    TrainResult result;
    int start_epoch = 0;
    double best_val = std::numeric_limits<double>::infinity();

    std::optional<Checkpoint> resume = opts.resume_from;
    if (!resume && opts.resume) resume = load_checkpoint(*opts.resume);
    if (resume) {
        if (resume->config.value("model", json()) != config["model"])
            throw ConfigError("checkpoint was written for a different model configuration");
        if (resume->config.value("policy", json()) != config["policy"])
            throw ConfigError("checkpoint was written for a different subset policy");
        json saved_train = resume->config.value("train", json());
        json now_train = config["train"];
        saved_train.erase("epochs");
        now_train.erase("epochs");
        if (saved_train != now_train) throw ConfigError("checkpoint was written for a different training configuration");
        try {
            params.assign_from(resume->params);
        } catch (const DataError& e) {
            throw DataError(std::string("checkpoint does not fit the model: ") + e.what());
        }
        if (resume->adam_m.size() != params.size()) throw DataError("checkpoint lacks optimizer state");
        adam.first_moment() = resume->adam_m;
        adam.second_moment() = resume->adam_v;
        adam.set_steps(resume->optimizer_step);
        restore_rng(resume->rng_state, data_rng, mask_rng);
        start_epoch = resume->epoch;
        best_val = resume->best_val;
        result.history = resume->history;
        if (!opts.out_dir.empty() && std::filesystem::exists(opts.out_dir / "best.ckpt"))
            result.best = load_checkpoint(opts.out_dir / "best.ckpt");
    }

    if (!opts.out_dir.empty()) std::filesystem::create_directories(opts.out_dir);
    JsonlLog log(opts.out_dir, resume.has_value());

    const auto snapshot = [&](int epoch) {
        Checkpoint ck;
        ck.config = config;
        ck.epoch = epoch;
        ck.params = params.cast<float>();
        ck.optimizer_step = adam.steps();
        ck.adam_m = adam.first_moment();
        ck.adam_v = adam.second_moment();
        ck.rng_state = rng_state(data_rng, mask_rng);
        ck.history = result.history;
        ck.best_val = best_val;
        return ck;
    };

    const auto t0 = std::chrono::steady_clock::now();
    const auto wall = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };
    const int n = static_cast<int>(prep.train.size());
    const float beta = static_cast<float>(tcfg.beta_loss);
    int end_epoch = tcfg.epochs;
    if (opts.stop_after_epoch >= 0) end_epoch = std::min(end_epoch, opts.stop_after_epoch);

    for (int epoch = start_epoch; epoch < end_epoch; ++epoch) {
        const auto e0 = std::chrono::steady_clock::now();
        std::vector<int> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), data_rng);

        double epoch_loss = 0;
        int steps = 0;
        for (int start = 0; start < n; start += tcfg.batch_size) {
            const int stop = std::min(n, start + tcfg.batch_size);
            params.zero_grad();
            double batch_loss = 0;
            for (int k = start; k < stop; ++k) {
                const FieldSample& s = prep.train[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])];
                const AvailabilityMask mask = sample_mask(policy, universe, mask_rng);
                const auto where = [&] {
                    return "epoch " + std::to_string(epoch + 1) + ", step " + std::to_string(adam.steps() + 1) +
                           " (sample time index " + std::to_string(s.time_index) + ", mask " +
                           mask.to_string(universe) + ")";
                };
                Graph<float> g(&params);
                Var loss;
                try {
                    Var pred = model.forward(g, g.input(gather_inputs<float>(s, universe, mask)), mask);
                    loss = ops::smooth_l1(g, pred, g.input(target_tensor<float>(s)), beta);
                } catch (const NumericError& e) {
                    throw NumericError(std::string(e.what()) + " at " + where());
                }
                const double l = g.value(loss)[0];
                if (!std::isfinite(l)) throw NumericError("non-finite loss at " + where());
                g.backward(loss);
                batch_loss += l;
            }
            const int b = stop - start;
            const float scale = 1.0f / static_cast<float>(b);
            for (std::size_t p = 0; p < params.size(); ++p)
                for (float& gv : params.grad(static_cast<int>(p)).data) gv *= scale;
            adam.step(params, tcfg.lr);
            batch_loss /= b;
            result.step_losses.push_back(batch_loss);
            epoch_loss += batch_loss;
            ++steps;
        }
        epoch_loss /= std::max(1, steps);
        const double val = validation_loss(model, prep.val, universe, policy, tcfg.beta_loss);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - e0).count();
        result.history.push_back({epoch + 1, epoch_loss, val, secs});
        log.record(epoch + 1, "train", epoch_loss, wall());
        if (!prep.val.empty()) log.record(epoch + 1, "val", val, wall());
        if (opts.log)
            *opts.log << "epoch " << epoch + 1 << "/" << tcfg.epochs << "  train " << epoch_loss << "  val " << val
                      << "  (" << secs << " s)\n";

        const double score = prep.val.empty() ? epoch_loss : val;
        const bool improved = score < best_val;
        if (improved) best_val = score;
        if (improved) {
            result.best = snapshot(epoch + 1);
            if (!opts.out_dir.empty()) save_checkpoint(*result.best, opts.out_dir / "best.ckpt");
        }
        if (!opts.out_dir.empty() && ((epoch + 1) % tcfg.checkpoint_every == 0 || epoch + 1 == end_epoch))
            save_checkpoint(snapshot(epoch + 1), opts.out_dir / "last.ckpt");
    }
    result.last = snapshot(std::max(start_epoch, end_epoch));
    return result;
}

}  // namespace wrecon
