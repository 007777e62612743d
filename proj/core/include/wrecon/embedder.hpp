#pragma once

#include <random>

#include "wrecon/datastore.hpp"
#include "wrecon/graph.hpp"

namespace wrecon {

struct EmbedderConfig {
    int num_vars = 4;
    int channels = 32;        // C_b
    int codebook_size = 8;    // K
    int template_h = 16;
    int template_w = 16;
    int mixer_hidden = 64;
    bool mixer_uses_mask = true;  // false: the mixer sees the pooled state only
    bool use_prompt = true;       // false: Z1 = Z0 (prompting ablated)

    void validate() const;
};

/// Adaptive observation embedder: per-variable 1x1 adapter followed by the
/// state-conditioned prompt and its residual interaction with the features.
///
/// Parameter names: embedder.uoa.W, embedder.scp.templates.{k},
/// embedder.scp.mixer.*, embedder.scp.refine.*, embedder.interact.*.
template <typename T>
class Embedder {
public:
    Embedder() = default;
    Embedder(const EmbedderConfig& cfg, ParamStore<T>& store, std::mt19937_64& rng);

    /// Z0[c] = sum over present i of W[i, c] * xs[row(i)]; xs rows follow mask order.
    Var project(Graph<T>& g, Var xs, const AvailabilityMask& mask) const;
    /// Spatial mean of Z0 per channel.
    Var state(Graph<T>& g, Var z0) const;
    /// Softmax mixing weights over the codebook.
    Var mix(Graph<T>& g, Var state, const AvailabilityMask& mask) const;
    /// Upsampled convex combination of templates, before the refine conv.
    Var blend(Graph<T>& g, Var alpha, int height, int width) const;
    Var prompt(Graph<T>& g, Var alpha, int height, int width) const;
    /// Z1 = Z0 + Conv3x3(ResBlock([Z0; P])).
    Var interact(Graph<T>& g, Var z0, Var prompt) const;

    Var forward(Graph<T>& g, Var xs, const AvailabilityMask& mask) const;

    const EmbedderConfig& config() const { return cfg_; }

private:
    Var mask_input(Graph<T>& g, const AvailabilityMask& mask) const;

    EmbedderConfig cfg_;
    int uoa_ = -1;
    std::vector<int> templates_;
    int mix_w1_ = -1, mix_b1_ = -1, mix_w2_ = -1, mix_b2_ = -1;
    int refine_w_ = -1, refine_b_ = -1;
    int res_w1_ = -1, res_b1_ = -1, res_w2_ = -1, res_b2_ = -1;
    int proj_w_ = -1, proj_b_ = -1;
};

extern template class Embedder<float>;
extern template class Embedder<double>;

}  // namespace wrecon
