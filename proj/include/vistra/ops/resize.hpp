#pragma once

#include "vistra/tape.hpp"

namespace vistra {

namespace detail {

struct ResizeTap {
    int64_t lo, hi;
    double w_lo, w_hi;
};

// Half-pixel-center source coordinates (align_corners = false).
inline std::vector<ResizeTap> resize_taps(int64_t in, int64_t out) {
    std::vector<ResizeTap> taps(static_cast<size_t>(out));
    const double scale = double(in) / double(out);
    for (int64_t o = 0; o < out; ++o) {
        double src = (double(o) + 0.5) * scale - 0.5;
        if (src < 0) src = 0;
        if (src > double(in - 1)) src = double(in - 1);
        const int64_t lo = int64_t(std::floor(src));
        const int64_t hi = std::min(lo + 1, in - 1);
        const double f = src - double(lo);
        taps[size_t(o)] = {lo, hi, 1.0 - f, f};
    }
    return taps;
}

}  // namespace detail

// Bilinear resize of [H, W, C] to [out_h, out_w, C]. Matching sizes return a
// bit-identical copy (no interpolation arithmetic).
template <typename T>
Tensor<T> bilinear_resize(const Tensor<T>& x, int64_t out_h, int64_t out_w) {
    if (x.rank() != 3) fail_shape("bilinear_resize: expected [H, W, C], got ", shape_str(x.shape));
    if (out_h < 1 || out_w < 1) fail_shape("bilinear_resize: target ", out_h, "x", out_w, " must be positive");
    const int64_t h = x.shape[0], w = x.shape[1], c = x.shape[2];

    Tensor<T> out = Tensor<T>::zeros({out_h, out_w, c});
    const T* px = x.ptr();
    T* po = out.ptr();

    if (out_h == h && out_w == w) {
        std::memcpy(po, px, size_t(x.numel()) * sizeof(T));
    } else {
        const auto ty = detail::resize_taps(h, out_h);
        const auto tx = detail::resize_taps(w, out_w);
        for (int64_t oy = 0; oy < out_h; ++oy)
            for (int64_t ox = 0; ox < out_w; ++ox) {
                const auto& ry = ty[size_t(oy)];
                const auto& rx = tx[size_t(ox)];
                const T* p00 = px + (ry.lo * w + rx.lo) * c;
                const T* p01 = px + (ry.lo * w + rx.hi) * c;
                const T* p10 = px + (ry.hi * w + rx.lo) * c;
                const T* p11 = px + (ry.hi * w + rx.hi) * c;
                T* orow = po + (oy * out_w + ox) * c;
                const T w00 = T(ry.w_lo * rx.w_lo), w01 = T(ry.w_lo * rx.w_hi);
                const T w10 = T(ry.w_hi * rx.w_lo), w11 = T(ry.w_hi * rx.w_hi);
                for (int64_t ch = 0; ch < c; ++ch)
                    orow[ch] = w00 * p00[ch] + w01 * p01[ch] + w10 * p10[ch] + w11 * p11[ch];
            }
    }
    check_finite(out, "bilinear_resize");

    if (auto* tp = active_tape<T>(); tp && tp->is_tracked(x)) {
        int nx = tp->ensure_node(x);
        int node = tp->record(out.numel(), [nx, h, w, c, out_h, out_w](Tape<T>& t, const std::vector<T>& g) {
            std::vector<T> gx(size_t(h * w * c), T(0));
            if (out_h == h && out_w == w) {
                for (size_t i = 0; i < g.size(); ++i) gx[i] = g[i];
            } else {
                const auto ty = detail::resize_taps(h, out_h);
                const auto tx = detail::resize_taps(w, out_w);
                for (int64_t oy = 0; oy < out_h; ++oy)
                    for (int64_t ox = 0; ox < out_w; ++ox) {
                        const auto& ry = ty[size_t(oy)];
                        const auto& rx = tx[size_t(ox)];
                        const T w00 = T(ry.w_lo * rx.w_lo), w01 = T(ry.w_lo * rx.w_hi);
                        const T w10 = T(ry.w_hi * rx.w_lo), w11 = T(ry.w_hi * rx.w_hi);
                        const T* grow = g.data() + (oy * out_w + ox) * c;
                        for (int64_t ch = 0; ch < c; ++ch) {
                            gx[size_t((ry.lo * w + rx.lo) * c + ch)] += w00 * grow[ch];
                            gx[size_t((ry.lo * w + rx.hi) * c + ch)] += w01 * grow[ch];
                            gx[size_t((ry.hi * w + rx.lo) * c + ch)] += w10 * grow[ch];
                            gx[size_t((ry.hi * w + rx.hi) * c + ch)] += w11 * grow[ch];
                        }
                    }
            }
            t.accum(nx, gx.data(), int64_t(gx.size()));
        });
        tp->mark_output(out, node);
    }
    return out;
}

}  // namespace vistra
