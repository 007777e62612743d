#include "wrecon/config.hpp"

#include <cstdint>
#include <fstream>
#include <set>
#include <type_traits>

#include "wrecon/errors.hpp"

namespace wrecon {

using nlohmann::json;

namespace {

class Fields {
public:
    Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_null() && !j_.is_object()) throw ConfigError(label() + " must be a JSON object");
    }

    template <typename T>
    void read(const std::string& key, T& dst) {
        seen_.insert(key);
        if (j_.is_null() || !j_.contains(key)) return;
        const json& v = j_.at(key);
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) wrong(key, "a boolean");
        } else if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>) {
            if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
                wrong(key, "a non-negative integer");
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) wrong(key, "an integer");
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) wrong(key, "a number");
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) wrong(key, "a string");
        }
        try {
            dst = v.get<T>();
        } catch (const json::exception&) {
            wrong(key, "of a different type");
        }
    }

    const json& section(const std::string& key) {
        seen_.insert(key);
        static const json null_json;
        if (j_.is_null() || !j_.contains(key)) return null_json;
        return j_.at(key);
    }

    std::string path(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }

    void finish() const {
        if (j_.is_null()) return;
        for (const auto& item : j_.items())
            if (!seen_.contains(item.key())) throw ConfigError("unknown configuration key '" + path(item.key()) + "'");
    }

private:
    [[noreturn]] void wrong(const std::string& key, const char* what) const {
        throw ConfigError("configuration key '" + path(key) + "' must be " + what);
    }
    std::string label() const { return where_.empty() ? "configuration" : "section '" + where_ + "'"; }

    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

SynthConfig read_synth(Fields& f, SynthConfig c) {
    f.read("height", c.height);
    f.read("width", c.width);
    f.read("variables", c.variables);
    f.read("modes", c.modes);
    f.read("max_wavenumber", c.max_wavenumber);
    f.read("spectral_slope", c.spectral_slope);
    f.read("max_drift", c.max_drift);
    f.read("eddies", c.eddies);
    f.read("eddy_radius", c.eddy_radius);
    f.read("eddy_speed", c.eddy_speed);
    f.read("eddy_amplitude", c.eddy_amplitude);
    f.read("ssh_scale", c.ssh_scale);
    f.read("velocity_scale", c.velocity_scale);
    f.read("divergent_ratio", c.divergent_ratio);
    f.read("temperature_scale", c.temperature_scale);
    f.read("salinity_scale", c.salinity_scale);
    f.read("ssh_temperature_correlation", c.ssh_temperature_correlation);
    f.read("mean_sst_amplitude", c.mean_sst_amplitude);
    f.read("mean_sst_slope", c.mean_sst_slope);
    f.read("w_scale", c.w_scale);
    f.read("gain", c.gain);
    f.read("noise_amplitude", c.noise_amplitude);
    f.read("attenuation", c.attenuation);
    std::vector<std::array<double, 3>> coupling;
    for (const auto& d : c.coupling) coupling.push_back({d.ssh_laplacian, d.divergence, d.buoyancy_laplacian});
    f.read("coupling", coupling);
    if (coupling.size() != 3) throw ConfigError("configuration key '" + f.path("coupling") + "' needs one row per depth");
    for (std::size_t d = 0; d < 3; ++d) c.coupling[d] = {coupling[d][0], coupling[d][1], coupling[d][2]};
    f.read("filter_window", c.filter.window);
    f.read("normalize_filter", c.filter.normalize_weights);

    Fields b(f.section("buoyancy"), f.path("buoyancy"));
    b.read("g", c.buoyancy.g);
    b.read("alpha_T", c.buoyancy.alpha_T);
    b.read("beta_S", c.buoyancy.beta_S);
    b.read("T0", c.buoyancy.T0);
    b.read("S0", c.buoyancy.S0);
    b.finish();
    return c;
}

json synth_json(const SynthConfig& c) {
    json coupling = json::array();
    for (const auto& d : c.coupling) coupling.push_back({d.ssh_laplacian, d.divergence, d.buoyancy_laplacian});
    return {
        {"height", c.height},
        {"width", c.width},
        {"variables", c.variables},
        {"modes", c.modes},
        {"max_wavenumber", c.max_wavenumber},
        {"spectral_slope", c.spectral_slope},
        {"max_drift", c.max_drift},
        {"eddies", c.eddies},
        {"eddy_radius", c.eddy_radius},
        {"eddy_speed", c.eddy_speed},
        {"eddy_amplitude", c.eddy_amplitude},
        {"ssh_scale", c.ssh_scale},
        {"velocity_scale", c.velocity_scale},
        {"divergent_ratio", c.divergent_ratio},
        {"temperature_scale", c.temperature_scale},
        {"salinity_scale", c.salinity_scale},
        {"ssh_temperature_correlation", c.ssh_temperature_correlation},
        {"mean_sst_amplitude", c.mean_sst_amplitude},
        {"mean_sst_slope", c.mean_sst_slope},
        {"w_scale", c.w_scale},
        {"gain", c.gain},
        {"noise_amplitude", c.noise_amplitude},
        {"attenuation", c.attenuation},
        {"coupling", coupling},
        {"filter_window", c.filter.window},
        {"normalize_filter", c.filter.normalize_weights},
        {"buoyancy",
         {{"g", c.buoyancy.g},
          {"alpha_T", c.buoyancy.alpha_T},
          {"beta_S", c.buoyancy.beta_S},
          {"T0", c.buoyancy.T0},
          {"S0", c.buoyancy.S0}}},
    };
}

}  // namespace

json to_json(const SynthConfig& c) {
    json j = synth_json(c);
    j["steps"] = c.steps;
    j["seed"] = c.seed;
    return j;
}

SynthConfig synth_config_from_json(const json& j, SynthConfig base) {
    Fields f(j, "synth");
    f.read("steps", base.steps);
    f.read("seed", base.seed);
    base = read_synth(f, base);
    f.finish();
    return base;
}

json to_json(const ModelConfig& c) {
    return {
        {"num_vars", c.embedder.num_vars},
        {"channels", c.embedder.channels},
        {"codebook_size", c.embedder.codebook_size},
        {"template_size", {c.embedder.template_h, c.embedder.template_w}},
        {"mixer_hidden", c.embedder.mixer_hidden},
        {"mixer_uses_mask", c.embedder.mixer_uses_mask},
        {"stages", c.backbone.stages},
        {"multiplier", c.backbone.multiplier},
        {"branch_kernels", c.backbone.branch_kernels},
        {"out_channels", c.backbone.out_channels},
        {"kernel", c.backbone.kernel},
        {"se_hidden", c.backbone.se_hidden},
        {"offset_init_std", c.backbone.offset_init_std},
        {"variant", to_string(c.variant)},
    };
}

ModelConfig model_config_from_json(const json& j, ModelConfig c) {
    Fields f(j, "model");
    f.read("num_vars", c.embedder.num_vars);
    f.read("channels", c.embedder.channels);
    f.read("codebook_size", c.embedder.codebook_size);
    const json& ts = f.section("template_size");
    if (ts.is_number_integer()) {
        c.embedder.template_h = c.embedder.template_w = ts.get<int>();
    } else if (ts.is_array() && ts.size() == 2 && ts[0].is_number_integer() && ts[1].is_number_integer()) {
        c.embedder.template_h = ts[0].get<int>();
        c.embedder.template_w = ts[1].get<int>();
    } else if (!ts.is_null()) {
        throw ConfigError("configuration key 'model.template_size' must be an integer or [height, width]");
    }
    f.read("mixer_hidden", c.embedder.mixer_hidden);
    f.read("mixer_uses_mask", c.embedder.mixer_uses_mask);
    f.read("stages", c.backbone.stages);
    f.read("multiplier", c.backbone.multiplier);
    f.read("branch_kernels", c.backbone.branch_kernels);
    f.read("out_channels", c.backbone.out_channels);
    f.read("kernel", c.backbone.kernel);
    f.read("se_hidden", c.backbone.se_hidden);
    f.read("offset_init_std", c.backbone.offset_init_std);
    std::string variant = to_string(c.variant);
    f.read("variant", variant);
    c.variant = parse_variant(variant);
    f.finish();
    c.backbone.in_channels = c.embedder.channels;
    return c;
}

json to_json(const SubsetPolicy& p) {
    return {{"mode", to_string(p.mode)},
            {"p_full", p.p_full},
            {"always_include", p.always_include},
            {"curriculum", p.curriculum},
            {"seed", p.seed}};
}

SubsetPolicy policy_from_json(const json& j, SubsetPolicy p) {
    Fields f(j, "policy");
    std::string mode = to_string(p.mode);
    f.read("mode", mode);
    p.mode = parse_policy_mode(mode);
    f.read("p_full", p.p_full);
    f.read("always_include", p.always_include);
    f.read("curriculum", p.curriculum);
    f.read("seed", p.seed);
    f.finish();
    return p;
}

json to_json(const TrainConfig& c) {
    return {{"epochs", c.epochs},
            {"lr", c.lr},
            {"batch_size", c.batch_size},
            {"beta_loss", c.beta_loss},
            {"adam_beta1", c.adam_beta1},
            {"adam_beta2", c.adam_beta2},
            {"adam_eps", c.adam_eps},
            {"checkpoint_every", c.checkpoint_every},
            {"lr_schedule", c.lr_schedule},
            {"seed", c.seed}};
}

TrainConfig train_config_from_json(const json& j, TrainConfig c) {
    Fields f(j, "train");
    f.read("epochs", c.epochs);
    f.read("lr", c.lr);
    f.read("batch_size", c.batch_size);
    f.read("beta_loss", c.beta_loss);
    f.read("adam_beta1", c.adam_beta1);
    f.read("adam_beta2", c.adam_beta2);
    f.read("adam_eps", c.adam_eps);
    f.read("checkpoint_every", c.checkpoint_every);
    f.read("lr_schedule", c.lr_schedule);
    f.read("seed", c.seed);
    f.finish();
    return c;
}

RunConfig RunConfig::from_json(const json& j) {
    RunConfig rc;
    Fields root(j, "");
    root.read("seed", rc.seed);

    {
        Fields f(root.section("dataset"), "dataset");
        f.read("t_train", rc.dataset.t_train);
        f.read("t_val", rc.dataset.t_val);
        f.read("t_test", rc.dataset.t_test);
        rc.dataset.synth = read_synth(f, rc.dataset.synth);
        f.finish();
    }
    {
        json m = root.section("model");
        if (m.is_object() && m.contains("num_vars"))
            throw ConfigError("configuration key 'model.num_vars' is derived from dataset.variables");
        rc.model = model_config_from_json(m, rc.model);
    }
    {
        json p = root.section("policy");
        if (p.is_object() && p.contains("seed")) throw ConfigError("configuration key 'policy.seed' is derived from seed");
        rc.policy = policy_from_json(p, rc.policy);
    }
    {
        json t = root.section("train");
        if (t.is_object() && t.contains("seed")) throw ConfigError("configuration key 'train.seed' is derived from seed");
        rc.train = train_config_from_json(t, rc.train);
    }
    {
        Fields f(root.section("eval"), "eval");
        f.read("masks", rc.eval.masks);
        f.read("split", rc.eval.split);
        f.read("variants", rc.eval.variants);
        f.finish();
    }
    {
        Fields f(root.section("paths"), "paths");
        f.read("data", rc.paths.data);
        f.read("out", rc.paths.out);
        f.finish();
    }
    root.finish();
    rc.derive();
    return rc;
}

RunConfig RunConfig::load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open config file " + file.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("config file " + file.string() + " is not valid JSON: " + e.what());
    }
    return from_json(j);
}

json RunConfig::to_json() const {
    json dataset = synth_json(this->dataset.synth);
    dataset["t_train"] = this->dataset.t_train;
    dataset["t_val"] = this->dataset.t_val;
    dataset["t_test"] = this->dataset.t_test;
    json model = wrecon::to_json(this->model);
    model.erase("num_vars");
    json policy = wrecon::to_json(this->policy);
    policy.erase("seed");
    json train = wrecon::to_json(this->train);
    train.erase("seed");
    return {
        {"seed", seed},
        {"dataset", dataset},
        {"model", model},
        {"policy", policy},
        {"train", train},
        {"eval", {{"masks", eval.masks}, {"split", eval.split}, {"variants", eval.variants}}},
        {"paths", {{"data", paths.data}, {"out", paths.out}}},
    };
}

void RunConfig::derive() {
    dataset.synth.seed = seed;
    dataset.synth.steps = dataset.t_train + dataset.t_val + dataset.t_test;
    model.embedder.num_vars = static_cast<int>(dataset.synth.variables.size());
    model.backbone.in_channels = model.embedder.channels;
    train.seed = seed + 1;
    policy.seed = seed + 2;
}

void RunConfig::validate() const {
    if (dataset.t_train < 1 || dataset.t_val < 0 || dataset.t_test < 0)
        throw ConfigError("dataset split sizes must be non-negative with t_train >= 1");
    synth().validate();
    model.validate();
    model.resolved().backbone.check_spatial(dataset.synth.height, dataset.synth.width);
    if (model.backbone.out_channels != 3) throw ConfigError("model.out_channels must be 3 (one per target depth)");
    const VariableUniverse universe(dataset.synth.variables);
    policy.validate(universe);
    train.validate();
    for (const auto& m : eval.masks) {
        try {
            AvailabilityMask::parse(universe, m);
        } catch (const DataError& e) {
            throw ConfigError(std::string("eval.masks: ") + e.what());
        }
    }
    for (const auto& v : eval.variants) parse_variant(v);
    if (eval.split != "train" && eval.split != "val" && eval.split != "test")
        throw ConfigError("eval.split must be train, val or test");
}

SynthConfig RunConfig::synth() const {
    SynthConfig s = dataset.synth;
    s.seed = seed;
    s.steps = dataset.t_train + dataset.t_val + dataset.t_test;
    return s;
}

}  // namespace wrecon
