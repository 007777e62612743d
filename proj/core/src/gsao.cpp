#include "wrecon/gsao.hpp"

#include <algorithm>

#include "init.hpp"
#include "wrecon/errors.hpp"
#include "wrecon/ops.hpp"

namespace wrecon {

void BackboneConfig::validate() const {
    if (in_channels < 1) throw ConfigError("backbone: in_channels must be >= 1");
    if (stages < 0) throw ConfigError("backbone: stages must be >= 0");
    if (multiplier < 1) throw ConfigError("backbone: multiplier must be >= 1");
    if (branch_kernels.empty()) throw ConfigError("backbone: at least one branch kernel required");
    for (int k : branch_kernels)
        if (k < 1 || k % 2 == 0) throw ConfigError("backbone: branch kernels must be odd and positive");
    if (kernel < 1 || kernel % 2 == 0) throw ConfigError("backbone: kernel must be odd and positive");
    if (out_channels < 1) throw ConfigError("backbone: out_channels must be >= 1");
    if (offset_init_std < 0) throw ConfigError("backbone: offset_init_std must be non-negative");
}

int BackboneConfig::channels_at(int level) const {
    int c = in_channels;
    for (int i = 0; i < level; ++i) c *= multiplier;
    return c;
}

void BackboneConfig::check_spatial(int height, int width) const {
    const int f = 1 << stages;
    if (height % f != 0 || width % f != 0)
        throw ConfigError("grid " + std::to_string(height) + "x" + std::to_string(width) + " must be divisible by 2^" +
                          std::to_string(stages) + " = " + std::to_string(f) + " (backbone stages)");
}

template <typename T>
GaroBlock<T>::GaroBlock(ParamStore<T>& store, const std::string& prefix, int channels, int kernel, bool deformable,
                        double offset_std, std::mt19937_64& rng)
    : kernel_(kernel) {
    const int taps = kernel * kernel;
    if (deformable) {
        offset_w_ = store.add(prefix + ".offset.weight",
                              detail::normal_init<T>({2 * taps, channels, kernel, kernel}, offset_std, rng));
        offset_b_ = store.add(prefix + ".offset.bias", Tensor<T>({2 * taps}));
    }
    conv_w_ = store.add(prefix + ".conv.weight",
                        detail::he_init<T>({channels, channels, kernel, kernel}, channels * taps, rng, 0.5));
    conv_b_ = store.add(prefix + ".conv.bias", Tensor<T>({channels}));
}

template <typename T>
Var GaroBlock<T>::offsets(Graph<T>& g, Var x) const {
    if (!deformable()) throw ConfigError("block has no offset predictor");
    return ops::conv2d(g, x, g.param(offset_w_), g.param(offset_b_), 1, kernel_ / 2);
}

template <typename T>
Var GaroBlock<T>::forward(Graph<T>& g, Var x) const {
    Var y;
    if (deformable())
        y = ops::deform_conv2d(g, x, offsets(g, x), g.param(conv_w_), g.param(conv_b_));
    else
        y = ops::conv2d(g, x, g.param(conv_w_), g.param(conv_b_), 1, kernel_ / 2);
    return ops::add(g, y, x);
}

template <typename T>
SsdcBlock<T>::SsdcBlock(ParamStore<T>& store, const std::string& prefix, int channels, const std::vector<int>& kernels,
                        int se_hidden, std::mt19937_64& rng)
    : kernels_(kernels) {
    for (int k : kernels_) {
        const std::string b = prefix + ".branch" + std::to_string(k);
        branch_w_.push_back(store.add(b + ".weight", detail::he_init<T>({channels, channels, k, k}, channels * k * k, rng)));
        branch_b_.push_back(store.add(b + ".bias", Tensor<T>({channels})));
    }
    if (kernels_.size() > 1) {
        const int hidden = se_hidden > 0 ? se_hidden : std::max(4, channels / 4);
        const int r = static_cast<int>(kernels_.size());
        se_w1_ = store.add(prefix + ".se.fc1.weight", detail::he_init<T>({hidden, channels}, channels, rng));
        se_b1_ = store.add(prefix + ".se.fc1.bias", Tensor<T>({hidden}));
        se_w2_ = store.add(prefix + ".se.fc2.weight", detail::he_init<T>({r, hidden}, hidden, rng, 0.5));
        se_b2_ = store.add(prefix + ".se.fc2.bias", Tensor<T>({r}));
    }
    psi_w1_ = store.add(prefix + ".psi.conv1.weight", detail::he_init<T>({channels, channels, 3, 3}, channels * 9, rng));
    psi_b1_ = store.add(prefix + ".psi.conv1.bias", Tensor<T>({channels}));
    psi_w2_ = store.add(prefix + ".psi.conv2.weight",
                        detail::he_init<T>({channels, channels, 3, 3}, channels * 9, rng, 0.3));
    psi_b2_ = store.add(prefix + ".psi.conv2.bias", Tensor<T>({channels}));
}

template <typename T>
Var SsdcBlock<T>::attention(Graph<T>& g, Var x) const {
    if (kernels_.size() == 1) return g.input(Tensor<T>({1}, T(1)));
    Var s = ops::global_avg_pool(g, x);
    Var h = ops::relu(g, ops::linear(g, s, g.param(se_w1_), g.param(se_b1_)));
    return ops::softmax(g, ops::linear(g, h, g.param(se_w2_), g.param(se_b2_)));
}

template <typename T>
Var SsdcBlock<T>::branch(Graph<T>& g, Var x, int r) const {
    const int k = kernels_.at(static_cast<std::size_t>(r));
    return ops::conv2d(g, x, g.param(branch_w_[static_cast<std::size_t>(r)]),
                       g.param(branch_b_[static_cast<std::size_t>(r)]), 1, k / 2);
}

template <typename T>
Var SsdcBlock<T>::fuse(Graph<T>& g, Var x) const {
    Var r = ops::relu(g, ops::conv2d(g, x, g.param(psi_w1_), g.param(psi_b1_), 1, 1));
    r = ops::conv2d(g, r, g.param(psi_w2_), g.param(psi_b2_), 1, 1);
    return ops::add(g, x, r);
}

template <typename T>
Var SsdcBlock<T>::forward_with_weights(Graph<T>& g, Var x, Var weights) const {
    std::vector<Var> outs;
    for (int r = 0; r < branches(); ++r) outs.push_back(branch(g, x, r));
    return fuse(g, ops::weighted_sum(g, outs, weights));
}

template <typename T>
Var SsdcBlock<T>::forward(Graph<T>& g, Var x) const {
    return forward_with_weights(g, x, attention(g, x));
}

template <typename T>
Backbone<T>::Backbone(const BackboneConfig& cfg, ParamStore<T>& store, std::mt19937_64& rng) : cfg_(cfg) {
    cfg_.validate();
    for (int i = 0; i < cfg_.stages; ++i) {
        const std::string p = "gsao.enc" + std::to_string(i);
        const int c = cfg_.channels_at(i), cn = cfg_.channels_at(i + 1);
        enc_.emplace_back(store, p + ".garo", c, cfg_.kernel, cfg_.deformable, cfg_.offset_init_std, rng);
        down_w_.push_back(store.add(p + ".down.weight", detail::he_init<T>({cn, c, 3, 3}, c * 9, rng)));
        down_b_.push_back(store.add(p + ".down.bias", Tensor<T>({cn})));
    }
    core_ = SsdcBlock<T>(store, "gsao.ssdc", cfg_.channels_at(cfg_.stages), cfg_.branch_kernels, cfg_.se_hidden, rng);
    dec_.resize(static_cast<std::size_t>(cfg_.stages));
    fuse_w_.resize(static_cast<std::size_t>(cfg_.stages));
    fuse_b_.resize(static_cast<std::size_t>(cfg_.stages));
    for (int i = cfg_.stages - 1; i >= 0; --i) {
        const std::string p = "gsao.dec" + std::to_string(i);
        const int c = cfg_.channels_at(i), cin = cfg_.channels_at(i + 1) + c;
        const auto u = static_cast<std::size_t>(i);
        fuse_w_[u] = store.add(p + ".fuse.weight", detail::he_init<T>({c, cin, 3, 3}, cin * 9, rng));
        fuse_b_[u] = store.add(p + ".fuse.bias", Tensor<T>({c}));
        dec_[u] = GaroBlock<T>(store, p + ".garo", c, cfg_.kernel, cfg_.deformable, cfg_.offset_init_std, rng);
    }
    const int c0 = cfg_.channels_at(0);
    head_w_ = store.add("gsao.head.weight", detail::he_init<T>({cfg_.out_channels, c0, 1, 1}, c0, rng, 0.5));
    head_b_ = store.add("gsao.head.bias", Tensor<T>({cfg_.out_channels}));
}

template <typename T>
Var Backbone<T>::forward(Graph<T>& g, Var z1) const {
    const Tensor<T>& v = g.value(z1);
    if (v.rank() != 3 || v.dim(0) != cfg_.in_channels)
        throw DataError("backbone expects [" + std::to_string(cfg_.in_channels) + ",H,W], got " + shape_str(v.shape));
    cfg_.check_spatial(v.dim(1), v.dim(2));
    std::vector<Var> skips;
    Var x = z1;
    for (int i = 0; i < cfg_.stages; ++i) {
        const auto u = static_cast<std::size_t>(i);
        x = enc_[u].forward(g, x);
        skips.push_back(x);
        x = ops::relu(g, ops::conv2d(g, x, g.param(down_w_[u]), g.param(down_b_[u]), 2, 1));
    }
    x = core_.forward(g, x);
    for (int i = cfg_.stages - 1; i >= 0; --i) {
        const auto u = static_cast<std::size_t>(i);
        const Tensor<T>& s = g.value(skips[u]);
        x = ops::upsample_bilinear(g, x, s.dim(1), s.dim(2));
        x = ops::concat(g, x, skips[u]);
        x = ops::relu(g, ops::conv2d(g, x, g.param(fuse_w_[u]), g.param(fuse_b_[u]), 1, 1));
        x = dec_[u].forward(g, x);
    }
    return ops::conv2d(g, x, g.param(head_w_), g.param(head_b_), 1, 0);
}

template class GaroBlock<float>;
template class GaroBlock<double>;
template class SsdcBlock<float>;
template class SsdcBlock<double>;
template class Backbone<float>;
template class Backbone<double>;

}  // namespace wrecon
