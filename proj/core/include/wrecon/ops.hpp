#pragma once

#include <span>
#include <vector>

#include "wrecon/graph.hpp"

namespace wrecon {

/// Non-recording building blocks shared by the graph ops and by tests.
namespace kernels {

/// Bilinear interpolation of one [h, w] plane at real-valued (y, x). Coordinates
/// outside the plane are clamped to the border.
template <typename T>
T bilinear_sample(const T* plane, int h, int w, T y, T x);

/// Interpolation stencil for one sample point of a clamped bilinear lookup.
template <typename T>
struct BilinearTap {
    int idx[4];        // y0*w+x0, y0*w+x1, y1*w+x0, y1*w+x1
    T weight[4];
    T dwdy[4];         // derivative of each weight w.r.t. the y coordinate (0 when clamped)
    T dwdx[4];
};

template <typename T>
BilinearTap<T> bilinear_tap(int h, int w, T y, T x);

/// Zero-padded im2col: x [c, h, w] -> cols [c*k*k, ho*wo].
template <typename T>
void im2col(const T* x, int c, int h, int w, int k, int stride, int pad, int ho, int wo, T* cols);

template <typename T>
void col2im(const T* cols, int c, int h, int w, int k, int stride, int pad, int ho, int wo, T* x);

/// Per-axis sources and weights of half-pixel bilinear resizing.
struct ResizeAxis {
    std::vector<int> lo, hi;
    std::vector<double> frac;
};
ResizeAxis resize_axis(int in, int out);

}  // namespace kernels

/// Differentiable primitives recorded on a Graph. Images are [C, H, W].
namespace ops {

template <typename T>
Var add(Graph<T>& g, Var a, Var b);

template <typename T>
Var mul(Graph<T>& g, Var a, Var b);

template <typename T>
Var relu(Graph<T>& g, Var x);

/// [Ca, H, W] ++ [Cb, H, W] -> [Ca + Cb, H, W]; also joins rank-1 vectors.
template <typename T>
Var concat(Graph<T>& g, Var a, Var b);

/// 2-D convolution with zero padding. w: [Co, Ci, k, k]; b: [Co] or invalid Var.
template <typename T>
Var conv2d(Graph<T>& g, Var x, Var w, Var b, int stride, int pad);

/// Deformable k x k convolution (stride 1, same padding). `offsets` is
/// [2*k*k, H, W] with (dy, dx) pairs per kernel tap in row-major tap order.
/// Sample positions are clamped to the border; the clamped coordinate
/// receives no gradient.
template <typename T>
Var deform_conv2d(Graph<T>& g, Var x, Var offsets, Var w, Var b);

/// Half-pixel bilinear resize to [C, out_h, out_w].
template <typename T>
Var upsample_bilinear(Graph<T>& g, Var x, int out_h, int out_w);

/// [C, H, W] -> [C] spatial mean.
template <typename T>
Var global_avg_pool(Graph<T>& g, Var x);

/// y = W x + b with W [m, n], x [n].
template <typename T>
Var linear(Graph<T>& g, Var x, Var w, Var b);

template <typename T>
Var softmax(Graph<T>& g, Var x);

/// Sum_r weights[r] * xs[r]; all xs share one shape, weights is [R].
template <typename T>
Var weighted_sum(Graph<T>& g, const std::vector<Var>& xs, Var weights);

/// Mean Smooth-L1 over all elements with threshold beta.
template <typename T>
Var smooth_l1(Graph<T>& g, Var pred, Var target, T beta);

/// 1x1 projection of the present-variable rows: xs [S, H, W], weight [N, Cb];
/// row s of xs is multiplied by weight row rows[s]. Output [Cb, H, W].
template <typename T>
Var gather_project(Graph<T>& g, Var xs, Var weight, std::span<const int> rows);

template <typename T>
Var sum_squares(Graph<T>& g, Var x);

}  // namespace ops
}  // namespace wrecon
