#pragma once

#include <cstdint>
#include <string>

#include "wrecon/datastore.hpp"
#include "wrecon/embedder.hpp"
#include "wrecon/gsao.hpp"

namespace wrecon {

enum class Variant { full, no_scp, no_gsao };

std::string to_string(Variant v);
Variant parse_variant(const std::string& s);

struct ModelConfig {
    EmbedderConfig embedder;
    BackboneConfig backbone;
    Variant variant = Variant::full;

    /// Applies the variant switches and ties backbone input width to C_b.
    ModelConfig resolved() const;
    void validate() const;
};

/// Embedder followed by the backbone; owns all parameters.
template <typename T>
class Model {
public:
    Model(const ModelConfig& cfg, std::uint64_t seed);

    Model(const Model&) = delete;
    Model& operator=(const Model&) = delete;

    /// xs: [|S|, H, W] rows in universe order of the set mask bits.
    Var forward(Graph<T>& g, Var xs, const AvailabilityMask& mask) const;
    /// Inference without gradient tracking.
    Tensor<T> predict(const Tensor<T>& xs, const AvailabilityMask& mask);

    ParamStore<T>& params() { return params_; }
    const ParamStore<T>& params() const { return params_; }
    const ModelConfig& config() const { return cfg_; }
    const Embedder<T>& embedder() const { return embedder_; }
    const Backbone<T>& backbone() const { return backbone_; }

private:
    ModelConfig cfg_;
    ParamStore<T> params_;
    Embedder<T> embedder_;
    Backbone<T> backbone_;
};

/// Stacks the present surface variables of a (normalized) sample as [|S|, H, W].
template <typename T>
Tensor<T> gather_inputs(const FieldSample& sample, const VariableUniverse& universe, const AvailabilityMask& mask);

/// Target of a sample as [C, H, W].
template <typename T>
Tensor<T> target_tensor(const FieldSample& sample);

extern template class Model<float>;
extern template class Model<double>;

}  // namespace wrecon
