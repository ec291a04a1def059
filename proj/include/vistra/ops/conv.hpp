#pragma once

#include "vistra/ops/counter.hpp"
#include "vistra/ops/matmul.hpp"
#include "vistra/tape.hpp"

namespace vistra {

namespace detail {

// Patch matrix for one group: rows are output positions, columns are
// (ky, kx, c-within-group). Out-of-bounds taps contribute zeros.
template <typename T>
void im2col(const T* x, int64_t h, int64_t w, int64_t c_in, int64_t group, int64_t c_g, int64_t kh,
            int64_t kw, int64_t stride, int64_t pad, int64_t oh, int64_t ow, T* col) {
    const int64_t cols = kh * kw * c_g;
    for (int64_t oy = 0; oy < oh; ++oy)
        for (int64_t ox = 0; ox < ow; ++ox) {
            T* row = col + (oy * ow + ox) * cols;
            for (int64_t ky = 0; ky < kh; ++ky) {
                const int64_t iy = oy * stride - pad + ky;
                for (int64_t kx = 0; kx < kw; ++kx) {
                    const int64_t ix = ox * stride - pad + kx;
                    T* dst = row + (ky * kw + kx) * c_g;
                    if (iy < 0 || iy >= h || ix < 0 || ix >= w) {
                        for (int64_t c = 0; c < c_g; ++c) dst[c] = T(0);
                    } else {
                        const T* src = x + (iy * w + ix) * c_in + group * c_g;
                        for (int64_t c = 0; c < c_g; ++c) dst[c] = src[c];
                    }
                }
            }
        }
}

template <typename T>
void col2im_accum(const T* col, int64_t h, int64_t w, int64_t c_in, int64_t group, int64_t c_g,
                  int64_t kh, int64_t kw, int64_t stride, int64_t pad, int64_t oh, int64_t ow, T* dx) {
    const int64_t cols = kh * kw * c_g;
    for (int64_t oy = 0; oy < oh; ++oy)
        for (int64_t ox = 0; ox < ow; ++ox) {
            const T* row = col + (oy * ow + ox) * cols;
            for (int64_t ky = 0; ky < kh; ++ky) {
                const int64_t iy = oy * stride - pad + ky;
                if (iy < 0 || iy >= h) continue;
                for (int64_t kx = 0; kx < kw; ++kx) {
                    const int64_t ix = ox * stride - pad + kx;
                    if (ix < 0 || ix >= w) continue;
                    const T* src = row + (ky * kw + kx) * c_g;
                    T* dst = dx + (iy * w + ix) * c_in + group * c_g;
                    for (int64_t c = 0; c < c_g; ++c) dst[c] += src[c];
                }
            }
        }
}

}  // namespace detail

// 2D cross-correlation on an [H, W, C_in] map with kernel
// [kh, kw, C_in/groups, C_out]. Depth-wise (groups == C_in == C_out) takes a
// direct path. Output extents: floor((in + 2*pad - k)/stride) + 1.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>* bias, int64_t stride,
                 int64_t pad, int64_t groups = 1) {
    if (x.rank() != 3) fail_shape("conv2d: expected input [H, W, C], got ", shape_str(x.shape));
    if (kernel.rank() != 4) fail_shape("conv2d: expected kernel [kh, kw, C_in/g, C_out], got ", shape_str(kernel.shape));
    const int64_t h = x.shape[0], w = x.shape[1], c_in = x.shape[2];
    const int64_t kh = kernel.shape[0], kw = kernel.shape[1], kc = kernel.shape[2], c_out = kernel.shape[3];
    if (groups < 1 || c_in % groups != 0 || c_out % groups != 0)
        fail_shape("conv2d: invalid group count ", groups, " for C_in=", c_in, ", C_out=", c_out);
    if (kc != c_in / groups)
        fail_shape("conv2d: kernel input channels ", kc, " != C_in/groups = ", c_in / groups);
    if (bias && bias->numel() != c_out) fail_shape("conv2d: bias size ", bias->numel(), " != C_out ", c_out);
    const int64_t oh = (h + 2 * pad - kh) / stride + 1;
    const int64_t ow = (w + 2 * pad - kw) / stride + 1;
    if (oh <= 0 || ow <= 0)
        fail_shape("conv2d: empty output for input ", shape_str(x.shape), " kernel ", shape_str(kernel.shape));

    const bool depthwise = (groups == c_in && c_in == c_out);
    Tensor<T> out = Tensor<T>::zeros({oh, ow, c_out});
    const T* px = x.ptr();
    const T* pk = kernel.ptr();
    T* po = out.ptr();

    if (depthwise) {
        for (int64_t oy = 0; oy < oh; ++oy)
            for (int64_t ox = 0; ox < ow; ++ox) {
                T* orow = po + (oy * ow + ox) * c_out;
                for (int64_t ky = 0; ky < kh; ++ky) {
                    const int64_t iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= h) continue;
                    for (int64_t kx = 0; kx < kw; ++kx) {
                        const int64_t ix = ox * stride - pad + kx;
                        if (ix < 0 || ix >= w) continue;
                        const T* xrow = px + (iy * w + ix) * c_in;
                        const T* krow = pk + (ky * kw + kx) * c_out;
                        for (int64_t c = 0; c < c_out; ++c) orow[c] += xrow[c] * krow[c];
                    }
                }
            }
    } else {
        const int64_t c_g = c_in / groups;
        const int64_t co_g = c_out / groups;
        const int64_t cols = kh * kw * c_g;
        std::vector<T> col(size_t(oh * ow * cols));
        std::vector<T> tmp(size_t(oh * ow * co_g));
        for (int64_t g = 0; g < groups; ++g) {
            detail::im2col(px, h, w, c_in, g, c_g, kh, kw, stride, pad, oh, ow, col.data());
            // kernel slice for this group: [cols, co_g] with stride c_out
            if (groups == 1) {
                detail::gemm_nn(po, col.data(), pk, oh * ow, cols, c_out, false);
            } else {
                std::vector<T> kg(size_t(cols * co_g));
                for (int64_t r = 0; r < cols; ++r)
                    for (int64_t j = 0; j < co_g; ++j) kg[size_t(r * co_g + j)] = pk[r * c_out + g * co_g + j];
                detail::gemm_nn(tmp.data(), col.data(), kg.data(), oh * ow, cols, co_g, false);
                for (int64_t p = 0; p < oh * ow; ++p)
                    for (int64_t j = 0; j < co_g; ++j) po[p * c_out + g * co_g + j] = tmp[size_t(p * co_g + j)];
            }
        }
    }
    if (bias) {
        const T* pb = bias->ptr();
        for (int64_t p = 0; p < oh * ow; ++p)
            for (int64_t c = 0; c < c_out; ++c) po[p * c_out + c] += pb[c];
    }
    count_macs(uint64_t(oh * ow) * uint64_t(kh * kw) * uint64_t(c_in / groups) * uint64_t(c_out));
    check_finite(out, "conv2d");

    auto* tp = active_tape<T>();
    const bool track_bias = bias && tp && tp->is_tracked(*bias);
    if (tp && (tp->is_tracked(x) || tp->is_tracked(kernel) || track_bias)) {
        int nx = tp->ensure_node(x), nk = tp->ensure_node(kernel);
        int nb = bias ? tp->ensure_node(*bias) : -1;
        int node = tp->record(
            out.numel(), [nx, nk, nb, sx = x.data, sk = kernel.data, h, w, c_in, c_out, kh, kw, stride, pad, oh,
                          ow, groups, depthwise](Tape<T>& t, const std::vector<T>& g) {
                const T* pg = g.data();
                if (nb >= 0) {
                    std::vector<T> gb(size_t(c_out), T(0));
                    for (int64_t p = 0; p < oh * ow; ++p)
                        for (int64_t c = 0; c < c_out; ++c) gb[size_t(c)] += pg[p * c_out + c];
                    t.accum(nb, gb.data(), c_out);
                }
                if (depthwise) {
                    std::vector<T> gk(size_t(kh * kw * c_out), T(0));
                    std::vector<T> gx(size_t(h * w * c_in), T(0));
                    const T* px = sx->data();
                    const T* pk = sk->data();
                    for (int64_t oy = 0; oy < oh; ++oy)
                        for (int64_t ox = 0; ox < ow; ++ox) {
                            const T* grow = pg + (oy * ow + ox) * c_out;
                            for (int64_t ky = 0; ky < kh; ++ky) {
                                const int64_t iy = oy * stride - pad + ky;
                                if (iy < 0 || iy >= h) continue;
                                for (int64_t kx = 0; kx < kw; ++kx) {
                                    const int64_t ix = ox * stride - pad + kx;
                                    if (ix < 0 || ix >= w) continue;
                                    const T* xrow = px + (iy * w + ix) * c_in;
                                    const T* krow = pk + (ky * kw + kx) * c_out;
                                    T* gkrow = gk.data() + (ky * kw + kx) * c_out;
                                    T* gxrow = gx.data() + (iy * w + ix) * c_in;
                                    for (int64_t c = 0; c < c_out; ++c) {
                                        gkrow[c] += grow[c] * xrow[c];
                                        gxrow[c] += grow[c] * krow[c];
                                    }
                                }
                            }
                        }
                    if (nk >= 0) t.accum(nk, gk.data(), int64_t(gk.size()));
                    if (nx >= 0) t.accum(nx, gx.data(), int64_t(gx.size()));
                } else {
                    const int64_t c_g = c_in / groups;
                    const int64_t co_g = c_out / groups;
                    const int64_t cols = kh * kw * c_g;
                    std::vector<T> col(size_t(oh * ow * cols));
                    std::vector<T> gk(size_t(cols * c_out), T(0));
                    std::vector<T> gx;
                    if (nx >= 0) gx.assign(size_t(h * w * c_in), T(0));
                    std::vector<T> g_group(size_t(oh * ow * co_g));
                    std::vector<T> dcol(size_t(oh * ow * cols));
                    const T* px = sx->data();
                    const T* pk = sk->data();
                    for (int64_t grp = 0; grp < groups; ++grp) {
                        detail::im2col(px, h, w, c_in, grp, c_g, kh, kw, stride, pad, oh, ow, col.data());
                        for (int64_t p = 0; p < oh * ow; ++p)
                            for (int64_t j = 0; j < co_g; ++j)
                                g_group[size_t(p * co_g + j)] = pg[p * c_out + grp * co_g + j];
                        if (nk >= 0) {
                            std::vector<T> gkg(size_t(cols * co_g), T(0));
                            detail::gemm_tn(gkg.data(), col.data(), g_group.data(), oh * ow, cols, co_g, true);
                            for (int64_t r = 0; r < cols; ++r)
                                for (int64_t j = 0; j < co_g; ++j)
                                    gk[size_t(r * c_out + grp * co_g + j)] += gkg[size_t(r * co_g + j)];
                        }
                        if (nx >= 0) {
                            std::vector<T> kg(size_t(cols * co_g));
                            for (int64_t r = 0; r < cols; ++r)
                                for (int64_t j = 0; j < co_g; ++j) kg[size_t(r * co_g + j)] = pk[r * c_out + grp * co_g + j];
                            detail::gemm_nt(dcol.data(), g_group.data(), kg.data(), oh * ow, co_g, cols, false);
                            detail::col2im_accum(dcol.data(), h, w, c_in, grp, c_g, kh, kw, stride, pad, oh, ow,
                                                 gx.data());
                        }
                    }
                    if (nk >= 0) t.accum(nk, gk.data(), int64_t(gk.size()));
                    if (nx >= 0) t.accum(nx, gx.data(), int64_t(gx.size()));
                }
            });
        tp->mark_output(out, node);
    }
    return out;
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias, int64_t stride,
                 int64_t pad, int64_t groups = 1) {
    return conv2d(x, kernel, &bias, stride, pad, groups);
}

}  // namespace vistra
