#include "wrecon/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

#include "wrecon/errors.hpp"

namespace wrecon {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const RowMat<T>>;

void require(bool ok, const std::string& what) {
    if (!ok) throw DataError(what);
}

// Plain left-to-right sum. Eigen's vectorized reductions peel according to
// the address alignment, which makes results depend on the allocator.
template <typename T>
T ordered_sum(const T* p, std::size_t n) {
    T s = 0;
    for (std::size_t i = 0; i < n; ++i) s += p[i];
    return s;
}

}  // namespace

namespace kernels {

template <typename T>
BilinearTap<T> bilinear_tap(int h, int w, T y, T x) {
    BilinearTap<T> t{};
    bool clamp_y = false;
    bool clamp_x = false;
    const T ymax = static_cast<T>(h - 1);
    const T xmax = static_cast<T>(w - 1);
    if (!(y >= T(0))) {  // also catches NaN
        y = T(0);
        clamp_y = true;
    } else if (y > ymax) {
        y = ymax;
        clamp_y = true;
    }
    if (!(x >= T(0))) {
        x = T(0);
        clamp_x = true;
    } else if (x > xmax) {
        x = xmax;
        clamp_x = true;
    }
    const int y0 = std::min(static_cast<int>(std::floor(y)), std::max(h - 2, 0));
    const int x0 = std::min(static_cast<int>(std::floor(x)), std::max(w - 2, 0));
    const int y1 = std::min(y0 + 1, h - 1);
    const int x1 = std::min(x0 + 1, w - 1);
    const T fy = y - static_cast<T>(y0);
    const T fx = x - static_cast<T>(x0);

    t.idx[0] = y0 * w + x0;
    t.idx[1] = y0 * w + x1;
    t.idx[2] = y1 * w + x0;
    t.idx[3] = y1 * w + x1;
    t.weight[0] = (T(1) - fy) * (T(1) - fx);
    t.weight[1] = (T(1) - fy) * fx;
    t.weight[2] = fy * (T(1) - fx);
    t.weight[3] = fy * fx;
    if (!clamp_y) {
        t.dwdy[0] = -(T(1) - fx);
        t.dwdy[1] = -fx;
        t.dwdy[2] = T(1) - fx;
        t.dwdy[3] = fx;
    }
    if (!clamp_x) {
        t.dwdx[0] = -(T(1) - fy);
        t.dwdx[1] = T(1) - fy;
        t.dwdx[2] = -fy;
        t.dwdx[3] = fy;
    }
    return t;
}

template <typename T>
T bilinear_sample(const T* plane, int h, int w, T y, T x) {
    const BilinearTap<T> t = bilinear_tap(h, w, y, x);
    return t.weight[0] * plane[t.idx[0]] + t.weight[1] * plane[t.idx[1]] + t.weight[2] * plane[t.idx[2]] +
           t.weight[3] * plane[t.idx[3]];
}

template <typename T>
void im2col(const T* x, int c, int h, int w, int k, int stride, int pad, int ho, int wo, T* cols) {
    const std::size_t n = static_cast<std::size_t>(ho) * wo;
    for (int ci = 0; ci < c; ++ci) {
        const T* plane = x + static_cast<std::size_t>(ci) * h * w;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                T* row = cols + (static_cast<std::size_t>(ci) * k * k + ky * k + kx) * n;
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * stride + ky - pad;
                    T* out = row + static_cast<std::size_t>(oy) * wo;
                    if (iy < 0 || iy >= h) {
                        std::fill(out, out + wo, T(0));
                        continue;
                    }
                    const T* src = plane + static_cast<std::size_t>(iy) * w;
                    if (stride == 1) {
                        const int lo = std::max(0, pad - kx);
                        const int hi = std::min(wo, w + pad - kx);
                        for (int ox = 0; ox < lo; ++ox) out[ox] = T(0);
                        for (int ox = lo; ox < hi; ++ox) out[ox] = src[ox + kx - pad];
                        for (int ox = std::max(hi, lo); ox < wo; ++ox) out[ox] = T(0);
                    } else {
                        for (int ox = 0; ox < wo; ++ox) {
                            const int ix = ox * stride + kx - pad;
                            out[ox] = (ix >= 0 && ix < w) ? src[ix] : T(0);
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im(const T* cols, int c, int h, int w, int k, int stride, int pad, int ho, int wo, T* x) {
    const std::size_t n = static_cast<std::size_t>(ho) * wo;
    for (int ci = 0; ci < c; ++ci) {
        T* plane = x + static_cast<std::size_t>(ci) * h * w;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const T* row = cols + (static_cast<std::size_t>(ci) * k * k + ky * k + kx) * n;
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * stride + ky - pad;
                    if (iy < 0 || iy >= h) continue;
                    T* dst = plane + static_cast<std::size_t>(iy) * w;
                    const T* in = row + static_cast<std::size_t>(oy) * wo;
                    for (int ox = 0; ox < wo; ++ox) {
                        const int ix = ox * stride + kx - pad;
                        if (ix >= 0 && ix < w) dst[ix] += in[ox];
                    }
                }
            }
        }
    }
}

ResizeAxis resize_axis(int in, int out) {
    ResizeAxis a;
    a.lo.resize(static_cast<std::size_t>(out));
    a.hi.resize(static_cast<std::size_t>(out));
    a.frac.resize(static_cast<std::size_t>(out));
    const double scale = static_cast<double>(in) / out;
    for (int o = 0; o < out; ++o) {
        double src = (o + 0.5) * scale - 0.5;
        if (src < 0) src = 0;
        int lo = static_cast<int>(std::floor(src));
        if (lo > in - 1) lo = in - 1;
        const int hi = std::min(lo + 1, in - 1);
        a.lo[static_cast<std::size_t>(o)] = lo;
        a.hi[static_cast<std::size_t>(o)] = hi;
        a.frac[static_cast<std::size_t>(o)] = src - lo;
    }
    return a;
}

template BilinearTap<float> bilinear_tap(int, int, float, float);
template BilinearTap<double> bilinear_tap(int, int, double, double);
template float bilinear_sample(const float*, int, int, float, float);
template double bilinear_sample(const double*, int, int, double, double);
template void im2col(const float*, int, int, int, int, int, int, int, int, float*);
template void im2col(const double*, int, int, int, int, int, int, int, int, double*);
template void col2im(const float*, int, int, int, int, int, int, int, int, float*);
template void col2im(const double*, int, int, int, int, int, int, int, int, double*);

}  // namespace kernels

namespace ops {

template <typename T>
Var add(Graph<T>& g, Var a, Var b) {
    const Tensor<T>& va = g.value(a);
    const Tensor<T>& vb = g.value(b);
    require(va.shape == vb.shape, "add: shape mismatch " + shape_str(va.shape) + " vs " + shape_str(vb.shape));
    Tensor<T> out = va;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += vb[i];
    return g.record(std::move(out), {a, b}, [a, b](Graph<T>& g, const Tensor<T>& dy) {
        for (Var v : {a, b}) {
            if (!g.requires_grad(v)) continue;
            Tensor<T>& d = g.grad(v);
            for (std::size_t i = 0; i < d.size(); ++i) d[i] += dy[i];
        }
    });
}

template <typename T>
Var mul(Graph<T>& g, Var a, Var b) {
    const Tensor<T>& va = g.value(a);
    const Tensor<T>& vb = g.value(b);
    require(va.shape == vb.shape, "mul: shape mismatch " + shape_str(va.shape) + " vs " + shape_str(vb.shape));
    Tensor<T> out = va;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= vb[i];
    return g.record(std::move(out), {a, b}, [a, b](Graph<T>& g, const Tensor<T>& dy) {
        const Tensor<T>& va = g.value(a);
        const Tensor<T>& vb = g.value(b);
        if (g.requires_grad(a)) {
            Tensor<T>& d = g.grad(a);
            for (std::size_t i = 0; i < d.size(); ++i) d[i] += dy[i] * vb[i];
        }
        if (g.requires_grad(b)) {
            Tensor<T>& d = g.grad(b);
            for (std::size_t i = 0; i < d.size(); ++i) d[i] += dy[i] * va[i];
        }
    });
}

template <typename T>
Var relu(Graph<T>& g, Var x) {
    Tensor<T> out = g.value(x);
    for (auto& v : out.data) v = v > T(0) ? v : T(0);
    const Var y{static_cast<int>(g.size())};
    return g.record(std::move(out), {x}, [x, y](Graph<T>& g, const Tensor<T>& dy) {
        const Tensor<T>& vy = g.value(y);
        Tensor<T>& d = g.grad(x);
        for (std::size_t i = 0; i < d.size(); ++i)
            if (vy[i] > T(0)) d[i] += dy[i];
    });
}

template <typename T>
Var concat(Graph<T>& g, Var a, Var b) {
    const Tensor<T>& va = g.value(a);
    const Tensor<T>& vb = g.value(b);
    require(va.rank() == vb.rank() && va.rank() >= 1, "concat: rank mismatch");
    for (int i = 1; i < va.rank(); ++i)
        require(va.dim(i) == vb.dim(i), "concat: trailing dims differ " + shape_str(va.shape) + " vs " +
                                            shape_str(vb.shape));
    Shape s = va.shape;
    s[0] += vb.dim(0);
    Tensor<T> out(s);
    std::copy(va.data.begin(), va.data.end(), out.data.begin());
    std::copy(vb.data.begin(), vb.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(va.size()));
    const std::size_t na = va.size();
    return g.record(std::move(out), {a, b}, [a, b, na](Graph<T>& g, const Tensor<T>& dy) {
        if (g.requires_grad(a)) {
            Tensor<T>& d = g.grad(a);
            for (std::size_t i = 0; i < d.size(); ++i) d[i] += dy[i];
        }
        if (g.requires_grad(b)) {
            Tensor<T>& d = g.grad(b);
            for (std::size_t i = 0; i < d.size(); ++i) d[i] += dy[na + i];
        }
    });
}

template <typename T>
Var conv2d(Graph<T>& g, Var x, Var w, Var b, int stride, int pad) {
    const Tensor<T>& vx = g.value(x);
    const Tensor<T>& vw = g.value(w);
    require(vx.rank() == 3 && vw.rank() == 4, "conv2d: expected x [C,H,W] and w [Co,Ci,k,k]");
    const int ci = vx.dim(0), h = vx.dim(1), wd = vx.dim(2);
    const int co = vw.dim(0), k = vw.dim(2);
    require(vw.dim(1) == ci, "conv2d: weight expects " + std::to_string(vw.dim(1)) + " input channels, got " +
                                 std::to_string(ci));
    require(vw.dim(3) == k, "conv2d: kernel must be square");
    const int ho = (h + 2 * pad - k) / stride + 1;
    const int wo = (wd + 2 * pad - k) / stride + 1;
    require(ho > 0 && wo > 0, "conv2d: empty output");
    const std::size_t n = static_cast<std::size_t>(ho) * wo;
    const int kk = ci * k * k;
    const bool pointwise = (k == 1 && stride == 1 && pad == 0);

    auto cols = std::make_shared<std::vector<T>>();
    const T* colp = vx.ptr();
    if (!pointwise) {
        cols->resize(static_cast<std::size_t>(kk) * n);
        kernels::im2col(vx.ptr(), ci, h, wd, k, stride, pad, ho, wo, cols->data());
        colp = cols->data();
    }
    Tensor<T> out({co, ho, wo});
    MapMat<T> y(out.ptr(), co, static_cast<Eigen::Index>(n));
    y.noalias() = CMapMat<T>(vw.ptr(), co, kk) * CMapMat<T>(colp, kk, static_cast<Eigen::Index>(n));
    if (b.valid()) {
        const Tensor<T>& vb = g.value(b);
        require(static_cast<int>(vb.size()) == co, "conv2d: bias size mismatch");
        for (int o = 0; o < co; ++o) y.row(o).array() += vb[static_cast<std::size_t>(o)];
    }
    std::vector<Var> inputs{x, w};
    if (b.valid()) inputs.push_back(b);
    return g.record(std::move(out), inputs,
                    [=, cols = std::move(cols)](Graph<T>& g, const Tensor<T>& dy) {
                        const T* cp = pointwise ? g.value(x).ptr() : cols->data();
                        CMapMat<T> colm(cp, kk, static_cast<Eigen::Index>(n));
                        CMapMat<T> dym(dy.ptr(), co, static_cast<Eigen::Index>(n));
                        if (g.requires_grad(w)) {
                            MapMat<T> dw(g.grad(w).ptr(), co, kk);
                            dw.noalias() += dym * colm.transpose();
                        }
                        if (b.valid() && g.requires_grad(b)) {
                            Tensor<T>& db = g.grad(b);
                            for (int o = 0; o < co; ++o)
                                db[static_cast<std::size_t>(o)] += ordered_sum(dy.ptr() + static_cast<std::size_t>(o) * n, n);
                        }
                        if (g.requires_grad(x)) {
                            CMapMat<T> wm(g.value(w).ptr(), co, kk);
                            Tensor<T>& dx = g.grad(x);
                            if (pointwise) {
                                MapMat<T>(dx.ptr(), kk, static_cast<Eigen::Index>(n)).noalias() +=
                                    wm.transpose() * dym;
                            } else {
                                RowMat<T> dcols = wm.transpose() * dym;
                                kernels::col2im(dcols.data(), ci, h, wd, k, stride, pad, ho, wo, dx.ptr());
                            }
                        }
                    });
}

template <typename T>
Var deform_conv2d(Graph<T>& g, Var x, Var offsets, Var w, Var b) {
    const Tensor<T>& vx = g.value(x);
    const Tensor<T>& voff = g.value(offsets);
    const Tensor<T>& vw = g.value(w);
    require(vx.rank() == 3 && vw.rank() == 4, "deform_conv2d: expected x [C,H,W] and w [Co,Ci,k,k]");
    const int ci = vx.dim(0), h = vx.dim(1), wd = vx.dim(2);
    const int co = vw.dim(0), k = vw.dim(2);
    require(vw.dim(1) == ci && vw.dim(3) == k, "deform_conv2d: weight shape " + shape_str(vw.shape) +
                                                   " incompatible with input " + shape_str(vx.shape));
    require(voff.shape == Shape{2 * k * k, h, wd},
            "deform_conv2d: offsets must be " + shape_str({2 * k * k, h, wd}) + ", got " + shape_str(voff.shape));
    const int pad = k / 2;
    const int taps = k * k;
    const std::size_t n = static_cast<std::size_t>(h) * wd;
    const int kk = ci * taps;
    for (T v : voff.data)
        if (!std::isfinite(v)) throw NumericError("deform_conv2d: non-finite sampling offset");

    auto stencil = std::make_shared<std::vector<kernels::BilinearTap<T>>>(static_cast<std::size_t>(taps) * n);
    for (int j = 0; j < taps; ++j) {
        const int ky = j / k, kx = j % k;
        const T* dyp = voff.ptr() + static_cast<std::size_t>(2 * j) * n;
        const T* dxp = voff.ptr() + static_cast<std::size_t>(2 * j + 1) * n;
        for (int oy = 0; oy < h; ++oy) {
            for (int ox = 0; ox < wd; ++ox) {
                const std::size_t p = static_cast<std::size_t>(oy) * wd + ox;
                (*stencil)[static_cast<std::size_t>(j) * n + p] =
                    kernels::bilinear_tap<T>(h, wd, static_cast<T>(oy + ky - pad) + dyp[p],
                                             static_cast<T>(ox + kx - pad) + dxp[p]);
            }
        }
    }
    auto cols = std::make_shared<std::vector<T>>(static_cast<std::size_t>(kk) * n);
    for (int c = 0; c < ci; ++c) {
        const T* plane = vx.ptr() + static_cast<std::size_t>(c) * n;
        for (int j = 0; j < taps; ++j) {
            T* row = cols->data() + (static_cast<std::size_t>(c) * taps + j) * n;
            const auto* st = stencil->data() + static_cast<std::size_t>(j) * n;
            for (std::size_t p = 0; p < n; ++p) {
                const auto& t = st[p];
                row[p] = t.weight[0] * plane[t.idx[0]] + t.weight[1] * plane[t.idx[1]] +
                         t.weight[2] * plane[t.idx[2]] + t.weight[3] * plane[t.idx[3]];
            }
        }
    }
    Tensor<T> out({co, h, wd});
    MapMat<T> y(out.ptr(), co, static_cast<Eigen::Index>(n));
    y.noalias() = CMapMat<T>(vw.ptr(), co, kk) * CMapMat<T>(cols->data(), kk, static_cast<Eigen::Index>(n));
    if (b.valid()) {
        const Tensor<T>& vb = g.value(b);
        require(static_cast<int>(vb.size()) == co, "deform_conv2d: bias size mismatch");
        for (int o = 0; o < co; ++o) y.row(o).array() += vb[static_cast<std::size_t>(o)];
    }
    std::vector<Var> inputs{x, offsets, w};
    if (b.valid()) inputs.push_back(b);
    return g.record(
        std::move(out), inputs,
        [=, cols = std::move(cols), stencil = std::move(stencil)](Graph<T>& g, const Tensor<T>& dy) {
            CMapMat<T> dym(dy.ptr(), co, static_cast<Eigen::Index>(n));
            if (g.requires_grad(w)) {
                MapMat<T> dw(g.grad(w).ptr(), co, kk);
                dw.noalias() += dym * CMapMat<T>(cols->data(), kk, static_cast<Eigen::Index>(n)).transpose();
            }
            if (b.valid() && g.requires_grad(b)) {
                Tensor<T>& db = g.grad(b);
                for (int o = 0; o < co; ++o) db[static_cast<std::size_t>(o)] += ordered_sum(dy.ptr() + static_cast<std::size_t>(o) * n, n);
            }
            const bool need_x = g.requires_grad(x);
            const bool need_off = g.requires_grad(offsets);
            if (!need_x && !need_off) return;
            RowMat<T> dcols = CMapMat<T>(g.value(w).ptr(), co, kk).transpose() * dym;
            const Tensor<T>& vx = g.value(x);
            T* dxp = need_x ? g.grad(x).ptr() : nullptr;
            T* doff = need_off ? g.grad(offsets).ptr() : nullptr;
            for (int c = 0; c < ci; ++c) {
                const T* plane = vx.ptr() + static_cast<std::size_t>(c) * n;
                T* dplane = need_x ? dxp + static_cast<std::size_t>(c) * n : nullptr;
                for (int j = 0; j < taps; ++j) {
                    const T* drow = dcols.data() + (static_cast<std::size_t>(c) * taps + j) * n;
                    const auto* st = stencil->data() + static_cast<std::size_t>(j) * n;
                    T* ddy = need_off ? doff + static_cast<std::size_t>(2 * j) * n : nullptr;
                    T* ddx = need_off ? doff + static_cast<std::size_t>(2 * j + 1) * n : nullptr;
                    for (std::size_t p = 0; p < n; ++p) {
                        const T d = drow[p];
                        if (d == T(0)) continue;
                        const auto& t = st[p];
                        if (dplane) {
                            for (int q = 0; q < 4; ++q) dplane[t.idx[q]] += t.weight[q] * d;
                        }
                        if (ddy) {
                            T gy = 0, gx = 0;
                            for (int q = 0; q < 4; ++q) {
                                gy += t.dwdy[q] * plane[t.idx[q]];
                                gx += t.dwdx[q] * plane[t.idx[q]];
                            }
                            ddy[p] += gy * d;
                            ddx[p] += gx * d;
                        }
                    }
                }
            }
        });
}

template <typename T>
Var upsample_bilinear(Graph<T>& g, Var x, int out_h, int out_w) {
    const Tensor<T>& vx = g.value(x);
    require(vx.rank() == 3, "upsample_bilinear: expected [C,H,W]");
    const int c = vx.dim(0), h = vx.dim(1), w = vx.dim(2);
    require(out_h >= 1 && out_w >= 1, "upsample_bilinear: empty target size");
    auto ay = std::make_shared<kernels::ResizeAxis>(kernels::resize_axis(h, out_h));
    auto ax = std::make_shared<kernels::ResizeAxis>(kernels::resize_axis(w, out_w));
    Tensor<T> out({c, out_h, out_w});
    for (int ch = 0; ch < c; ++ch) {
        const T* src = vx.ptr() + static_cast<std::size_t>(ch) * h * w;
        T* dst = out.ptr() + static_cast<std::size_t>(ch) * out_h * out_w;
        for (int oy = 0; oy < out_h; ++oy) {
            const T fy = static_cast<T>(ay->frac[static_cast<std::size_t>(oy)]);
            const T* r0 = src + static_cast<std::size_t>(ay->lo[static_cast<std::size_t>(oy)]) * w;
            const T* r1 = src + static_cast<std::size_t>(ay->hi[static_cast<std::size_t>(oy)]) * w;
            for (int ox = 0; ox < out_w; ++ox) {
                const std::size_t o = static_cast<std::size_t>(ox);
                const T fx = static_cast<T>(ax->frac[o]);
                const int x0 = ax->lo[o], x1 = ax->hi[o];
                dst[static_cast<std::size_t>(oy) * out_w + ox] =
                    (T(1) - fy) * ((T(1) - fx) * r0[x0] + fx * r0[x1]) + fy * ((T(1) - fx) * r1[x0] + fx * r1[x1]);
            }
        }
    }
    return g.record(std::move(out), {x}, [=](Graph<T>& g, const Tensor<T>& dy) {
        Tensor<T>& dx = g.grad(x);
        for (int ch = 0; ch < c; ++ch) {
            T* dst = dx.ptr() + static_cast<std::size_t>(ch) * h * w;
            const T* src = dy.ptr() + static_cast<std::size_t>(ch) * out_h * out_w;
            for (int oy = 0; oy < out_h; ++oy) {
                const T fy = static_cast<T>(ay->frac[static_cast<std::size_t>(oy)]);
                T* r0 = dst + static_cast<std::size_t>(ay->lo[static_cast<std::size_t>(oy)]) * w;
                T* r1 = dst + static_cast<std::size_t>(ay->hi[static_cast<std::size_t>(oy)]) * w;
                for (int ox = 0; ox < out_w; ++ox) {
                    const std::size_t o = static_cast<std::size_t>(ox);
                    const T fx = static_cast<T>(ax->frac[o]);
                    const int x0 = ax->lo[o], x1 = ax->hi[o];
                    const T d = src[static_cast<std::size_t>(oy) * out_w + ox];
                    r0[x0] += (T(1) - fy) * (T(1) - fx) * d;
                    r0[x1] += (T(1) - fy) * fx * d;
                    r1[x0] += fy * (T(1) - fx) * d;
                    r1[x1] += fy * fx * d;
                }
            }
        }
    });
}

template <typename T>
Var global_avg_pool(Graph<T>& g, Var x) {
    const Tensor<T>& vx = g.value(x);
    require(vx.rank() == 3, "global_avg_pool: expected [C,H,W]");
    const int c = vx.dim(0);
    const std::size_t n = static_cast<std::size_t>(vx.dim(1)) * vx.dim(2);
    Tensor<T> out({c});
    for (int ch = 0; ch < c; ++ch) {
        const T* p = vx.ptr() + static_cast<std::size_t>(ch) * n;
        T s = 0;
        for (std::size_t i = 0; i < n; ++i) s += p[i];
        out[static_cast<std::size_t>(ch)] = s / static_cast<T>(n);
    }
    return g.record(std::move(out), {x}, [x, c, n](Graph<T>& g, const Tensor<T>& dy) {
        Tensor<T>& dx = g.grad(x);
        for (int ch = 0; ch < c; ++ch) {
            const T d = dy[static_cast<std::size_t>(ch)] / static_cast<T>(n);
            T* p = dx.ptr() + static_cast<std::size_t>(ch) * n;
            for (std::size_t i = 0; i < n; ++i) p[i] += d;
        }
    });
}

template <typename T>
Var linear(Graph<T>& g, Var x, Var w, Var b) {
    const Tensor<T>& vx = g.value(x);
    const Tensor<T>& vw = g.value(w);
    require(vw.rank() == 2 && vx.rank() == 1 && vw.dim(1) == vx.dim(0),
            "linear: weight " + shape_str(vw.shape) + " incompatible with input " + shape_str(vx.shape));
    const int m = vw.dim(0), n = vw.dim(1);
    Tensor<T> out({m});
    for (int i = 0; i < m; ++i) {
        T s = b.valid() ? g.value(b)[static_cast<std::size_t>(i)] : T(0);
        const T* row = vw.ptr() + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) s += row[j] * vx[static_cast<std::size_t>(j)];
        out[static_cast<std::size_t>(i)] = s;
    }
    std::vector<Var> inputs{x, w};
    if (b.valid()) inputs.push_back(b);
    return g.record(std::move(out), inputs, [=](Graph<T>& g, const Tensor<T>& dy) {
        const Tensor<T>& vx = g.value(x);
        const Tensor<T>& vw = g.value(w);
        if (g.requires_grad(w)) {
            Tensor<T>& dw = g.grad(w);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j)
                    dw[static_cast<std::size_t>(i) * n + j] += dy[static_cast<std::size_t>(i)] * vx[static_cast<std::size_t>(j)];
        }
        if (b.valid() && g.requires_grad(b)) {
            Tensor<T>& db = g.grad(b);
            for (int i = 0; i < m; ++i) db[static_cast<std::size_t>(i)] += dy[static_cast<std::size_t>(i)];
        }
        if (g.requires_grad(x)) {
            Tensor<T>& dx = g.grad(x);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j)
                    dx[static_cast<std::size_t>(j)] += dy[static_cast<std::size_t>(i)] * vw[static_cast<std::size_t>(i) * n + j];
        }
    });
}

template <typename T>
Var softmax(Graph<T>& g, Var x) {
    const Tensor<T>& vx = g.value(x);
    require(vx.rank() == 1 && vx.size() > 0, "softmax: expected a non-empty vector");
    for (T v : vx.data)
        if (!std::isfinite(static_cast<double>(v))) throw NumericError("softmax: non-finite logit");
    const T mx = *std::max_element(vx.data.begin(), vx.data.end());
    Tensor<T> out(vx.shape);
    T s = 0;
    for (std::size_t i = 0; i < vx.size(); ++i) {
        out[i] = std::exp(vx[i] - mx);
        s += out[i];
    }
    for (auto& v : out.data) v /= s;
    const Var y{static_cast<int>(g.size())};
    return g.record(std::move(out), {x}, [x, y](Graph<T>& g, const Tensor<T>& dy) {
        const Tensor<T>& vy = g.value(y);
        T dot = 0;
        for (std::size_t i = 0; i < vy.size(); ++i) dot += dy[i] * vy[i];
        Tensor<T>& dx = g.grad(x);
        for (std::size_t i = 0; i < vy.size(); ++i) dx[i] += vy[i] * (dy[i] - dot);
    });
}

template <typename T>
Var weighted_sum(Graph<T>& g, const std::vector<Var>& xs, Var weights) {
    const Tensor<T>& vw = g.value(weights);
    require(!xs.empty() && vw.size() == xs.size(), "weighted_sum: need one weight per input");
    const Shape shape = g.value(xs.front()).shape;
    Tensor<T> out(shape);
    for (std::size_t r = 0; r < xs.size(); ++r) {
        const Tensor<T>& v = g.value(xs[r]);
        require(v.shape == shape, "weighted_sum: inputs differ in shape");
        const T a = vw[r];
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += a * v[i];
    }
    std::vector<Var> inputs = xs;
    inputs.push_back(weights);
    return g.record(std::move(out), inputs, [xs, weights](Graph<T>& g, const Tensor<T>& dy) {
        const Tensor<T>& vw = g.value(weights);
        const bool need_w = g.requires_grad(weights);
        for (std::size_t r = 0; r < xs.size(); ++r) {
            if (need_w) {
                const Tensor<T>& v = g.value(xs[r]);
                T dot = 0;
                for (std::size_t i = 0; i < v.size(); ++i) dot += v[i] * dy[i];
                g.grad(weights)[r] += dot;
            }
            if (g.requires_grad(xs[r])) {
                Tensor<T>& dx = g.grad(xs[r]);
                const T a = vw[r];
                for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += a * dy[i];
            }
        }
    });
}

template <typename T>
Var smooth_l1(Graph<T>& g, Var pred, Var target, T beta) {
    const Tensor<T>& vp = g.value(pred);
    const Tensor<T>& vt = g.value(target);
    require(vp.shape == vt.shape, "smooth_l1: shape mismatch " + shape_str(vp.shape) + " vs " + shape_str(vt.shape));
    require(vp.size() > 0, "smooth_l1: empty input");
    if (!(beta > T(0))) throw ConfigError("smooth_l1: beta must be positive");
    double acc = 0;
    for (std::size_t i = 0; i < vp.size(); ++i) {
        const double d = static_cast<double>(vp[i]) - static_cast<double>(vt[i]);
        const double ad = std::abs(d);
        acc += ad < beta ? 0.5 * d * d / beta : ad - 0.5 * beta;
    }
    Tensor<T> out({1}, static_cast<T>(acc / static_cast<double>(vp.size())));
    return g.record(std::move(out), {pred, target}, [pred, target, beta](Graph<T>& g, const Tensor<T>& dy) {
        const Tensor<T>& vp = g.value(pred);
        const Tensor<T>& vt = g.value(target);
        const T scale = dy[0] / static_cast<T>(vp.size());
        T* dp = g.requires_grad(pred) ? g.grad(pred).ptr() : nullptr;
        T* dt = g.requires_grad(target) ? g.grad(target).ptr() : nullptr;
        for (std::size_t i = 0; i < vp.size(); ++i) {
            const T d = vp[i] - vt[i];
            T s;
            if (std::abs(d) < beta)
                s = d / beta;
            else
                s = d > T(0) ? T(1) : T(-1);
            if (dp) dp[i] += s * scale;
            if (dt) dt[i] -= s * scale;
        }
    });
}

template <typename T>
Var gather_project(Graph<T>& g, Var xs, Var weight, std::span<const int> rows) {
    const Tensor<T>& vx = g.value(xs);
    const Tensor<T>& vw = g.value(weight);
    require(vx.rank() == 3 && vw.rank() == 2, "gather_project: expected xs [S,H,W] and weight [N,Cb]");
    const int s = vx.dim(0);
    require(s >= 1, "gather_project: no variables present");
    require(static_cast<int>(rows.size()) == s,
            "gather_project: " + std::to_string(s) + " input rows but " + std::to_string(rows.size()) + " mask bits set");
    const int nvars = vw.dim(0), cb = vw.dim(1);
    for (int r : rows) require(r >= 0 && r < nvars, "gather_project: row index out of range");
    const std::size_t n = static_cast<std::size_t>(vx.dim(1)) * vx.dim(2);
    RowMat<T> ws(s, cb);
    for (int i = 0; i < s; ++i) ws.row(i) = CMapMat<T>(vw.ptr(), nvars, cb).row(rows[static_cast<std::size_t>(i)]);
    Tensor<T> out({cb, vx.dim(1), vx.dim(2)});
    MapMat<T>(out.ptr(), cb, static_cast<Eigen::Index>(n)).noalias() =
        ws.transpose() * CMapMat<T>(vx.ptr(), s, static_cast<Eigen::Index>(n));
    std::vector<int> idx(rows.begin(), rows.end());
    return g.record(std::move(out), {xs, weight}, [=](Graph<T>& g, const Tensor<T>& dy) {
        CMapMat<T> dym(dy.ptr(), cb, static_cast<Eigen::Index>(n));
        if (g.requires_grad(weight)) {
            RowMat<T> dws = CMapMat<T>(g.value(xs).ptr(), s, static_cast<Eigen::Index>(n)) * dym.transpose();
            MapMat<T> dw(g.grad(weight).ptr(), nvars, cb);
            for (int i = 0; i < s; ++i) dw.row(idx[static_cast<std::size_t>(i)]) += dws.row(i);
        }
        if (g.requires_grad(xs)) {
            const Tensor<T>& vw = g.value(weight);
            RowMat<T> ws(s, cb);
            for (int i = 0; i < s; ++i) ws.row(i) = CMapMat<T>(vw.ptr(), nvars, cb).row(idx[static_cast<std::size_t>(i)]);
            MapMat<T>(g.grad(xs).ptr(), s, static_cast<Eigen::Index>(n)).noalias() += ws * dym;
        }
    });
}

template <typename T>
Var sum_squares(Graph<T>& g, Var x) {
    const Tensor<T>& vx = g.value(x);
    T s = 0;
    for (T v : vx.data) s += v * v;
    return g.record(Tensor<T>({1}, s), {x}, [x](Graph<T>& g, const Tensor<T>& dy) {
        const Tensor<T>& vx = g.value(x);
        Tensor<T>& dx = g.grad(x);
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += T(2) * vx[i] * dy[0];
    });
}

#define WRECON_INSTANTIATE_OPS(T)                                                             \
    template Var add<T>(Graph<T>&, Var, Var);                                                 \
    template Var mul<T>(Graph<T>&, Var, Var);                                                 \
    template Var relu<T>(Graph<T>&, Var);                                                     \
    template Var concat<T>(Graph<T>&, Var, Var);                                              \
    template Var conv2d<T>(Graph<T>&, Var, Var, Var, int, int);                               \
    template Var deform_conv2d<T>(Graph<T>&, Var, Var, Var, Var);                             \
    template Var upsample_bilinear<T>(Graph<T>&, Var, int, int);                              \
    template Var global_avg_pool<T>(Graph<T>&, Var);                                          \
    template Var linear<T>(Graph<T>&, Var, Var, Var);                                         \
    template Var softmax<T>(Graph<T>&, Var);                                                  \
    template Var weighted_sum<T>(Graph<T>&, const std::vector<Var>&, Var);                    \
    template Var smooth_l1<T>(Graph<T>&, Var, Var, T);                                        \
    template Var gather_project<T>(Graph<T>&, Var, Var, std::span<const int>);                \
    template Var sum_squares<T>(Graph<T>&, Var);

WRECON_INSTANTIATE_OPS(float)
WRECON_INSTANTIATE_OPS(double)

#undef WRECON_INSTANTIATE_OPS

}  // namespace ops
}  // namespace wrecon
