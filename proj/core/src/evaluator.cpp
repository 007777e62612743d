#include "wrecon/evaluator.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "wrecon/config.hpp"
#include "wrecon/errors.hpp"
#include "wrecon/metrics.hpp"

namespace wrecon {

using nlohmann::json;

json MetricsReport::to_json() const {
    json depths_json = json::array();
    for (const auto& d : depths)
        depths_json.push_back(
            {{"level", d.level}, {"rmse", d.rmse}, {"mae", d.mae}, {"pcc", std::isfinite(d.pcc) ? json(d.pcc) : json(nullptr)}, {"pcc_skipped", d.pcc_skipped}});
    return {{"mask", mask}, {"model", model_id}, {"split", split}, {"samples", samples}, {"depths", depths_json}};
}

double MetricsReport::mean_rmse() const {
    if (depths.empty()) return 0;
    double s = 0;
    for (const auto& d : depths) s += d.rmse;
    return s / static_cast<double>(depths.size());
}

Predictor model_predictor(Model<float>& model, const VariableUniverse& universe) {
    return [&model, universe](const FieldSample& s, const AvailabilityMask& mask) {
        return model.predict(gather_inputs<float>(s, universe, mask), mask);
    };
}

Predictor climatology_predictor() {
    return [](const FieldSample& s, const AvailabilityMask&) {
        return Tensor<float>({s.channels, s.height, s.width}, 0.0f);
    };
}

MetricsReport evaluate_predictor(const Dataset& data, const Predictor& predict, const AvailabilityMask& mask,
                                 const std::string& split, const std::string& model_id) {
    const auto& universe = data.manifest.universe;
    if (mask.size() != universe.size()) throw DataError("mask does not match the dataset's variable universe");
    if (!mask.any()) throw DataError("evaluation mask must contain at least one variable");
    for (int i : mask.present())
        if (!data.manifest.files.contains(universe.name(i)))
            throw DataError("dataset has no data for variable " + universe.name(i));
    const auto& idx = data.split(split);
    if (idx.empty()) throw DataError("split '" + split + "' is empty");

    const int c = data.manifest.channels;
    const std::size_t plane = static_cast<std::size_t>(data.manifest.height) * data.manifest.width;
    const int b = static_cast<int>(idx.size());
    std::vector<std::vector<double>> preds(static_cast<std::size_t>(c)), targets(static_cast<std::size_t>(c));
    for (auto& v : preds) v.reserve(plane * idx.size());
    for (auto& v : targets) v.reserve(plane * idx.size());

    for (int t : idx) {
        const FieldSample& raw = data.samples.at(static_cast<std::size_t>(t));
        const Tensor<float> out = predict(normalize(raw, data.stats), mask);
        if (out.shape != Shape{c, raw.height, raw.width})
            throw DataError("predictor returned shape " + shape_str(out.shape));
        for (int ch = 0; ch < c; ++ch) {
            const auto& st = data.stats.target.at(static_cast<std::size_t>(ch));
            for (std::size_t p = 0; p < plane; ++p) {
                const std::size_t k = static_cast<std::size_t>(ch) * plane + p;
                const double v = static_cast<double>(out[k]) * st.std + st.mean;
                if (!std::isfinite(v)) throw NumericError("non-finite prediction at time index " + std::to_string(t));
                preds[static_cast<std::size_t>(ch)].push_back(v);
                targets[static_cast<std::size_t>(ch)].push_back(raw.target[k]);
            }
        }
    }

    MetricsReport r;
    r.mask = mask.to_string(universe);
    r.model_id = model_id;
    r.split = split;
    r.samples = b;
    for (int ch = 0; ch < c; ++ch) {
        DepthMetrics d;
        d.level = ch < static_cast<int>(data.manifest.target_levels.size())
                      ? data.manifest.target_levels[static_cast<std::size_t>(ch)]
                      : ch;
        const auto& p = preds[static_cast<std::size_t>(ch)];
        const auto& t = targets[static_cast<std::size_t>(ch)];
        d.rmse = rmse(p, t, b);
        d.mae = mae(p, t, b);
        try {
            const PccResult pr = pcc(p, t, b);
            d.pcc = pr.value;
            d.pcc_skipped = pr.skipped;
        } catch (const DataError&) {
            // Constant predictors (e.g. climatology) have no correlation.
            d.pcc = std::numeric_limits<double>::quiet_NaN();
            d.pcc_skipped = b;
        }
        r.depths.push_back(d);
    }
    return r;
}

MetricsReport evaluate(Model<float>& model, const Dataset& data, const AvailabilityMask& mask, const std::string& split,
                       const std::string& model_id) {
    return evaluate_predictor(data, model_predictor(model, data.manifest.universe), mask, split, model_id);
}

json SweepResult::to_json() const {
    json j = json::array();
    for (const auto& r : reports) j.push_back(r.to_json());
    return j;
}

std::vector<std::string> default_family() { return {"SSH", "SSH+U+V", "SSH+U+V+B"}; }

SweepResult sweep_subsets(Model<float>& model, const Dataset& data, const std::vector<AvailabilityMask>& family,
                          const std::string& split, const std::string& model_id) {
    if (family.empty()) throw ConfigError("subset family must contain at least one mask");
    for (std::size_t i = 0; i < family.size(); ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (family[i] == family[j])
                throw ConfigError("subset family lists mask " + family[i].to_string(data.manifest.universe) + " twice");
    SweepResult out;
    for (const auto& m : family) out.reports.push_back(evaluate(model, data, m, split, model_id));
    return out;
}

std::string metrics_csv_header(bool with_variant) {
    return std::string(with_variant ? "variant," : "") + "mask,depth_level,rmse,mae,pcc,pcc_skipped,samples\n";
}

std::string metrics_csv_rows(const std::vector<MetricsReport>& reports, const std::string& variant) {
    std::ostringstream s;
    s << std::setprecision(10);
    for (const auto& r : reports)
        for (const auto& d : r.depths) {
            if (!variant.empty()) s << variant << ',';
            s << r.mask << ',' << d.level << ',' << d.rmse << ',' << d.mae << ',' << d.pcc << ',' << d.pcc_skipped << ','
              << r.samples << '\n';
        }
    return s.str();
}

json AblationResult::to_json() const {
    json j = json::array();
    for (const auto& e : entries) {
        json reports = json::array();
        for (const auto& r : e.reports) reports.push_back(r.to_json());
        j.push_back({{"variant", to_string(e.variant)}, {"parameters", e.parameters}, {"reports", reports}});
    }
    return j;
}

std::string AblationResult::csv() const {
    std::string out = metrics_csv_header(true);
    for (const auto& e : entries) out += metrics_csv_rows(e.reports, to_string(e.variant));
    return out;
}

void check_ablation_compatible(const std::vector<Checkpoint>& checkpoints) {
    if (checkpoints.empty()) throw ConfigError("ablation needs at least one checkpoint");
    const auto strip = [](json cfg) {
        cfg.erase("run");
        if (cfg.contains("model")) cfg["model"].erase("variant");
        return cfg;
    };
    const json ref = strip(checkpoints.front().config);
    for (std::size_t i = 1; i < checkpoints.size(); ++i) {
        const json other = strip(checkpoints[i].config);
        if (other == ref) continue;
        for (const auto& item : ref.items())
            if (!other.contains(item.key()) || other.at(item.key()) != item.value())
                throw ConfigError("ablation variants differ in their '" + item.key() + "' configuration");
        throw ConfigError("ablation variants differ in their configuration");
    }
}

AblationResult ablate(const std::vector<Checkpoint>& checkpoints, const Dataset& data,
                      const std::vector<AvailabilityMask>& scenarios, const std::string& split) {
    check_ablation_compatible(checkpoints);
    if (scenarios.empty()) throw ConfigError("ablation needs at least one scenario");
    AblationResult result;
    for (const auto& ck : checkpoints) {
        auto model = model_from_checkpoint(ck);
        AblationEntry e;
        e.variant = model->config().variant;
        e.parameters = model->params().total_elements();
        for (const auto& m : scenarios) e.reports.push_back(evaluate(*model, data, m, split, to_string(e.variant)));
        result.entries.push_back(std::move(e));
    }
    return result;
}

AblationResult train_and_ablate(const Dataset& data, const ModelConfig& base, const std::vector<Variant>& variants,
                                const SubsetPolicy& policy, const TrainConfig& tcfg,
                                const std::vector<AvailabilityMask>& scenarios, const std::string& split,
                                const std::filesystem::path& out_dir, std::ostream* log) {
    if (variants.empty()) throw ConfigError("ablation needs at least one variant");
    std::vector<Checkpoint> trained;
    for (Variant v : variants) {
        ModelConfig cfg = base;
        cfg.variant = v;
        TrainOptions opts;
        if (!out_dir.empty()) opts.out_dir = out_dir / to_string(v);
        opts.log = log;
        if (log) *log << "training variant " << to_string(v) << "\n";
        TrainResult r = train(data, cfg, policy, tcfg, opts);
        trained.push_back(std::move(r.last));
    }
    return ablate(trained, data, scenarios, split);
}

json dump_fields(Model<float>& model, const Dataset& data, const AvailabilityMask& mask, const std::string& split,
                 int position) {
    const auto& idx = data.split(split);
    if (position < 0 || position >= static_cast<int>(idx.size()))
        throw DataError("split '" + split + "' has no sample at position " + std::to_string(position));
    const int t = idx[static_cast<std::size_t>(position)];
    const FieldSample& raw = data.samples.at(static_cast<std::size_t>(t));
    const Tensor<float> out =
        model.predict(gather_inputs<float>(normalize(raw, data.stats), data.manifest.universe, mask), mask);
    const std::size_t plane = raw.plane();
    json depths = json::array();
    for (int ch = 0; ch < raw.channels; ++ch) {
        const auto& st = data.stats.target.at(static_cast<std::size_t>(ch));
        std::vector<double> pred(plane), target(plane), error(plane);
        for (std::size_t p = 0; p < plane; ++p) {
            const std::size_t k = static_cast<std::size_t>(ch) * plane + p;
            pred[p] = static_cast<double>(out[k]) * st.std + st.mean;
            target[p] = raw.target[k];
            error[p] = pred[p] - target[p];
        }
        depths.push_back({{"level", data.manifest.target_levels.at(static_cast<std::size_t>(ch))},
                          {"prediction", pred},
                          {"target", target},
                          {"error", error}});
    }
    return {{"mask", mask.to_string(data.manifest.universe)},
            {"split", split},
            {"time_index", t},
            {"height", raw.height},
            {"width", raw.width},
            {"depths", depths}};
}

}  // namespace wrecon
