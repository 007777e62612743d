#pragma once

#include <random>
#include <string>
#include <vector>

#include "wrecon/graph.hpp"

namespace wrecon {

struct BackboneConfig {
    int in_channels = 32;  // C_b
    int stages = 3;
    int multiplier = 2;
    std::vector<int> branch_kernels{3, 5, 7};
    int out_channels = 3;
    int kernel = 3;
    int se_hidden = 0;  // 0: max(4, bottleneck channels / 4)
    bool deformable = true;
    /// Standard deviation of the offset predictor weights at init; 0 gives
    /// exactly zero offsets (plain convolution behaviour) at initialization.
    double offset_init_std = 0.0;

    void validate() const;
    int channels_at(int level) const;
    /// Rejects sizes not divisible by 2^stages.
    void check_spatial(int height, int width) const;
};

/// Deformable residual block: conv(sample(x, p0 + offsets(x))) + x. When not
/// deformable, conv(x) + x with zero padding.
template <typename T>
class GaroBlock {
public:
    GaroBlock() = default;
    GaroBlock(ParamStore<T>& store, const std::string& prefix, int channels, int kernel, bool deformable,
              double offset_std, std::mt19937_64& rng);

    Var forward(Graph<T>& g, Var x) const;
    /// Predicted sampling offsets [2*k*k, H, W].
    Var offsets(Graph<T>& g, Var x) const;
    bool deformable() const { return offset_w_ >= 0; }
    int kernel() const { return kernel_; }

    int conv_weight() const { return conv_w_; }
    int conv_bias() const { return conv_b_; }
    int offset_weight() const { return offset_w_; }
    int offset_bias() const { return offset_b_; }

private:
    int kernel_ = 3;
    int offset_w_ = -1, offset_b_ = -1, conv_w_ = -1, conv_b_ = -1;
};

/// Selective-kernel bottleneck: fuse(sum_r w_r * conv_{k_r}(x)) with
/// w = softmax(SE(x)).
template <typename T>
class SsdcBlock {
public:
    SsdcBlock() = default;
    SsdcBlock(ParamStore<T>& store, const std::string& prefix, int channels, const std::vector<int>& kernels,
              int se_hidden, std::mt19937_64& rng);

    /// Branch weights on the simplex, one per kernel.
    Var attention(Graph<T>& g, Var x) const;
    Var branch(Graph<T>& g, Var x, int r) const;
    /// Residual block applied after mixing.
    Var fuse(Graph<T>& g, Var x) const;
    Var forward(Graph<T>& g, Var x) const;
    /// Same as forward() with externally supplied branch weights.
    Var forward_with_weights(Graph<T>& g, Var x, Var weights) const;

    int branches() const { return static_cast<int>(kernels_.size()); }
    const std::vector<int>& kernels() const { return kernels_; }
    int branch_weight(int r) const { return branch_w_.at(static_cast<std::size_t>(r)); }
    int branch_bias(int r) const { return branch_b_.at(static_cast<std::size_t>(r)); }

private:
    std::vector<int> kernels_;
    std::vector<int> branch_w_, branch_b_;
    int se_w1_ = -1, se_b1_ = -1, se_w2_ = -1, se_b2_ = -1;
    int psi_w1_ = -1, psi_b1_ = -1, psi_w2_ = -1, psi_b2_ = -1;
};

/// Encoder-decoder backbone. Each encoder level is a GARO block followed by a
/// stride-2 convolution that multiplies the channel count; the bottleneck is an
/// SSDC block; each decoder level upsamples, concatenates the matching encoder
/// skip, fuses with a 3x3 convolution and applies a GARO block. A 1x1 head
/// maps to out_channels.
///
/// Parameter names: gsao.enc{i}.garo.*, gsao.enc{i}.down.*, gsao.ssdc.*,
/// gsao.dec{i}.fuse.*, gsao.dec{i}.garo.*, gsao.head.*.
template <typename T>
class Backbone {
public:
    Backbone() = default;
    Backbone(const BackboneConfig& cfg, ParamStore<T>& store, std::mt19937_64& rng);

    Var forward(Graph<T>& g, Var z1) const;

    const BackboneConfig& config() const { return cfg_; }
    const GaroBlock<T>& encoder_block(int i) const { return enc_.at(static_cast<std::size_t>(i)); }
    const GaroBlock<T>& decoder_block(int i) const { return dec_.at(static_cast<std::size_t>(i)); }
    const SsdcBlock<T>& core() const { return core_; }

private:
    BackboneConfig cfg_;
    std::vector<GaroBlock<T>> enc_, dec_;
    std::vector<int> down_w_, down_b_, fuse_w_, fuse_b_;
    SsdcBlock<T> core_;
    int head_w_ = -1, head_b_ = -1;
};

extern template class GaroBlock<float>;
extern template class GaroBlock<double>;
extern template class SsdcBlock<float>;
extern template class SsdcBlock<double>;
extern template class Backbone<float>;
extern template class Backbone<double>;

}  // namespace wrecon
