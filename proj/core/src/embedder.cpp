#include "wrecon/embedder.hpp"

#include "init.hpp"
#include "wrecon/errors.hpp"
#include "wrecon/ops.hpp"

namespace wrecon {

void EmbedderConfig::validate() const {
    if (num_vars < 1) throw ConfigError("embedder: num_vars must be >= 1");
    if (channels < 1) throw ConfigError("embedder: channels must be >= 1");
    if (codebook_size < 2) throw ConfigError("embedder: codebook_size must be >= 2");
    if (template_h < 1 || template_w < 1) throw ConfigError("embedder: template size must be positive");
    if (mixer_hidden < 1) throw ConfigError("embedder: mixer_hidden must be >= 1");
}

template <typename T>
Embedder<T>::Embedder(const EmbedderConfig& cfg, ParamStore<T>& store, std::mt19937_64& rng) : cfg_(cfg) {
    cfg_.validate();
    const int cb = cfg_.channels, n = cfg_.num_vars;
    uoa_ = store.add("embedder.uoa.W", detail::normal_init<T>({n, cb}, 1.0 / std::sqrt(static_cast<double>(n)), rng));
    if (!cfg_.use_prompt) return;

    for (int k = 0; k < cfg_.codebook_size; ++k)
        templates_.push_back(store.add("embedder.scp.templates." + std::to_string(k),
                                       detail::normal_init<T>({cb, cfg_.template_h, cfg_.template_w}, 1.0, rng)));
    const int mix_in = cb + (cfg_.mixer_uses_mask ? n : 0);
    mix_w1_ = store.add("embedder.scp.mixer.fc1.weight", detail::he_init<T>({cfg_.mixer_hidden, mix_in}, mix_in, rng));
    mix_b1_ = store.add("embedder.scp.mixer.fc1.bias", Tensor<T>({cfg_.mixer_hidden}));
    mix_w2_ = store.add("embedder.scp.mixer.fc2.weight",
                        detail::he_init<T>({cfg_.codebook_size, cfg_.mixer_hidden}, cfg_.mixer_hidden, rng));
    mix_b2_ = store.add("embedder.scp.mixer.fc2.bias", Tensor<T>({cfg_.codebook_size}));
    refine_w_ = store.add("embedder.scp.refine.weight", detail::he_init<T>({cb, cb, 3, 3}, cb * 9, rng, 0.5));
    refine_b_ = store.add("embedder.scp.refine.bias", Tensor<T>({cb}));
    const int c2 = 2 * cb;
    res_w1_ = store.add("embedder.interact.res.conv1.weight", detail::he_init<T>({c2, c2, 3, 3}, c2 * 9, rng));
    res_b1_ = store.add("embedder.interact.res.conv1.bias", Tensor<T>({c2}));
    res_w2_ = store.add("embedder.interact.res.conv2.weight", detail::he_init<T>({c2, c2, 3, 3}, c2 * 9, rng, 0.3));
    res_b2_ = store.add("embedder.interact.res.conv2.bias", Tensor<T>({c2}));
    proj_w_ = store.add("embedder.interact.proj.weight", detail::he_init<T>({cb, c2, 3, 3}, c2 * 9, rng, 0.3));
    proj_b_ = store.add("embedder.interact.proj.bias", Tensor<T>({cb}));
}

template <typename T>
Var Embedder<T>::project(Graph<T>& g, Var xs, const AvailabilityMask& mask) const {
    if (mask.size() != cfg_.num_vars)
        throw DataError("mask has " + std::to_string(mask.size()) + " bits, universe has " +
                        std::to_string(cfg_.num_vars));
    if (!mask.any()) throw DataError("at least one variable must be present");
    const auto rows = mask.present();
    return ops::gather_project(g, xs, g.param(uoa_), rows);
}

template <typename T>
Var Embedder<T>::state(Graph<T>& g, Var z0) const {
    return ops::global_avg_pool(g, z0);
}

template <typename T>
Var Embedder<T>::mask_input(Graph<T>& g, const AvailabilityMask& mask) const {
    Tensor<T> bits({mask.size()});
    for (int i = 0; i < mask.size(); ++i) bits[static_cast<std::size_t>(i)] = mask.test(i) ? T(1) : T(0);
    return g.input(std::move(bits));
}

template <typename T>
Var Embedder<T>::mix(Graph<T>& g, Var state, const AvailabilityMask& mask) const {
    if (!cfg_.use_prompt) throw ConfigError("embedder built without prompting has no mixer");
    Var in = state;
    if (cfg_.mixer_uses_mask) in = ops::concat(g, state, mask_input(g, mask));
    Var h = ops::relu(g, ops::linear(g, in, g.param(mix_w1_), g.param(mix_b1_)));
    Var logits = ops::linear(g, h, g.param(mix_w2_), g.param(mix_b2_));
    return ops::softmax(g, logits);
}

template <typename T>
Var Embedder<T>::blend(Graph<T>& g, Var alpha, int height, int width) const {
    if (!cfg_.use_prompt) throw ConfigError("embedder built without prompting has no codebook");
    const Tensor<T>& a = g.value(alpha);
    if (static_cast<int>(a.size()) != cfg_.codebook_size)
        throw DataError("mixing weights have " + std::to_string(a.size()) + " entries, codebook has " +
                        std::to_string(cfg_.codebook_size));
    double sum = 0;
    for (T v : a.data) sum += static_cast<double>(v);
    const double tol = std::is_same_v<T, double> ? 1e-6 : 1e-4;
    if (std::abs(sum - 1.0) > tol) throw DataError("mixing weights must sum to one");
    if (height < cfg_.template_h || width < cfg_.template_w)
        throw DataError("prompt target " + std::to_string(height) + "x" + std::to_string(width) +
                        " is smaller than the template " + std::to_string(cfg_.template_h) + "x" +
                        std::to_string(cfg_.template_w));
    std::vector<Var> ts;
    ts.reserve(templates_.size());
    for (int id : templates_) ts.push_back(g.param(id));
    Var mixed = ops::weighted_sum(g, ts, alpha);
    return ops::upsample_bilinear(g, mixed, height, width);
}

template <typename T>
Var Embedder<T>::prompt(Graph<T>& g, Var alpha, int height, int width) const {
    return ops::conv2d(g, blend(g, alpha, height, width), g.param(refine_w_), g.param(refine_b_), 1, 1);
}

template <typename T>
Var Embedder<T>::interact(Graph<T>& g, Var z0, Var prompt) const {
    if (g.value(z0).shape != g.value(prompt).shape)
        throw DataError("prompt " + shape_str(g.value(prompt).shape) + " is not aligned with features " +
                        shape_str(g.value(z0).shape));
    Var x = ops::concat(g, z0, prompt);
    Var r = ops::relu(g, ops::conv2d(g, x, g.param(res_w1_), g.param(res_b1_), 1, 1));
    r = ops::conv2d(g, r, g.param(res_w2_), g.param(res_b2_), 1, 1);
    Var q = ops::add(g, x, r);
    return ops::add(g, z0, ops::conv2d(g, q, g.param(proj_w_), g.param(proj_b_), 1, 1));
}

template <typename T>
Var Embedder<T>::forward(Graph<T>& g, Var xs, const AvailabilityMask& mask) const {
    Var z0 = project(g, xs, mask);
    if (!cfg_.use_prompt) return z0;
    const int h = g.value(z0).dim(1), w = g.value(z0).dim(2);
    Var alpha = mix(g, state(g, z0), mask);
    Var p = prompt(g, alpha, h, w);
    return interact(g, z0, p);
}

template class Embedder<float>;
template class Embedder<double>;

}  // namespace wrecon
