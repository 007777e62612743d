#include "wrecon/model.hpp"

#include <random>

#include "wrecon/errors.hpp"
#include "wrecon/ops.hpp"

namespace wrecon {

std::string to_string(Variant v) {
    switch (v) {
        case Variant::full: return "full";
        case Variant::no_scp: return "no_scp";
        case Variant::no_gsao: return "no_gsao";
    }
    return "full";
}

Variant parse_variant(const std::string& s) {
    if (s == "full") return Variant::full;
    if (s == "no_scp") return Variant::no_scp;
    if (s == "no_gsao") return Variant::no_gsao;
    throw ConfigError("unknown model variant '" + s + "' (expected full, no_scp or no_gsao)");
}

ModelConfig ModelConfig::resolved() const {
    ModelConfig r = *this;
    r.backbone.in_channels = r.embedder.channels;
    switch (variant) {
        case Variant::full: break;
        case Variant::no_scp: r.embedder.use_prompt = false; break;
        case Variant::no_gsao:
            r.backbone.deformable = false;
            r.backbone.branch_kernels = {3};
            break;
    }
    return r;
}

void ModelConfig::validate() const {
    const ModelConfig r = resolved();
    r.embedder.validate();
    r.backbone.validate();
}

template <typename T>
Model<T>::Model(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg.resolved()) {
    cfg_.embedder.validate();
    cfg_.backbone.validate();
    std::mt19937_64 rng(seed);
    embedder_ = Embedder<T>(cfg_.embedder, params_, rng);
    backbone_ = Backbone<T>(cfg_.backbone, params_, rng);
}

template <typename T>
Var Model<T>::forward(Graph<T>& g, Var xs, const AvailabilityMask& mask) const {
    return backbone_.forward(g, embedder_.forward(g, xs, mask));
}

template <typename T>
Tensor<T> Model<T>::predict(const Tensor<T>& xs, const AvailabilityMask& mask) {
    Graph<T> g(&params_, false);
    Var y = forward(g, g.input(xs), mask);
    return g.value(y);
}

template <typename T>
Tensor<T> gather_inputs(const FieldSample& sample, const VariableUniverse& universe, const AvailabilityMask& mask) {
    if (mask.size() != universe.size()) throw DataError("mask does not match the variable universe");
    const auto present = mask.present();
    if (present.empty()) throw DataError("at least one variable must be present");
    Tensor<T> xs({static_cast<int>(present.size()), sample.height, sample.width});
    const std::size_t n = sample.plane();
    for (std::size_t r = 0; r < present.size(); ++r) {
        const auto& name = universe.name(present[r]);
        auto it = sample.surface.find(name);
        if (it == sample.surface.end()) throw DataError("sample lacks variable " + name);
        std::copy(it->second.begin(), it->second.end(), xs.data.begin() + static_cast<std::ptrdiff_t>(r * n));
    }
    return xs;
}

template <typename T>
Tensor<T> target_tensor(const FieldSample& sample) {
    Tensor<T> t({sample.channels, sample.height, sample.width});
    std::copy(sample.target.begin(), sample.target.end(), t.data.begin());
    return t;
}

template class Model<float>;
template class Model<double>;
template Tensor<float> gather_inputs<float>(const FieldSample&, const VariableUniverse&, const AvailabilityMask&);
template Tensor<double> gather_inputs<double>(const FieldSample&, const VariableUniverse&, const AvailabilityMask&);
template Tensor<float> target_tensor<float>(const FieldSample&);
template Tensor<double> target_tensor<double>(const FieldSample&);

}  // namespace wrecon
