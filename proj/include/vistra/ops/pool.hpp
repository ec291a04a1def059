#pragma once

#include "vistra/tape.hpp"

namespace vistra {

enum class PoolMode { Avg, Max };

// Window pooling over [H, W, C]. With ceil_mode, partial edge windows are
// clamped to the valid region; averages divide by the real element count.
template <typename T>
Tensor<T> pool2d(const Tensor<T>& x, int64_t win_h, int64_t win_w, int64_t stride_h, int64_t stride_w,
                 PoolMode mode, bool ceil_mode = false) {
    if (x.rank() != 3) fail_shape("pool2d: expected [H, W, C], got ", shape_str(x.shape));
    const int64_t h = x.shape[0], w = x.shape[1], c = x.shape[2];
    if (win_h < 1 || win_w < 1 || stride_h < 1 || stride_w < 1) fail_shape("pool2d: bad window/stride");
    if (!ceil_mode && (win_h > h || win_w > w))
        fail_shape("pool2d: window ", win_h, "x", win_w, " exceeds input ", h, "x", w);
    auto out_extent = [&](int64_t in, int64_t win, int64_t s) {
        const int64_t num = in - win;
        int64_t o = ceil_mode ? ceil_div(num, s) + 1 : num / s + 1;
        // never start a window entirely past the end
        while (o > 1 && (o - 1) * s >= in) --o;
        return o;
    };
    const int64_t oh = out_extent(h, win_h, stride_h);
    const int64_t ow = out_extent(w, win_w, stride_w);

    Tensor<T> out = Tensor<T>::zeros({oh, ow, c});
    const T* px = x.ptr();
    T* po = out.ptr();
    auto argmax = std::make_shared<std::vector<int64_t>>();
    auto counts = std::make_shared<std::vector<T>>();
    if (mode == PoolMode::Max) argmax->assign(size_t(out.numel()), 0);
    if (mode == PoolMode::Avg) counts->assign(size_t(oh * ow), T(0));

    for (int64_t oy = 0; oy < oh; ++oy)
        for (int64_t ox = 0; ox < ow; ++ox) {
            const int64_t y0 = oy * stride_h, x0 = ox * stride_w;
            const int64_t y1 = std::min(y0 + win_h, h), x1 = std::min(x0 + win_w, w);
            const int64_t n_real = (y1 - y0) * (x1 - x0);
            T* orow = po + (oy * ow + ox) * c;
            if (mode == PoolMode::Avg) {
                (*counts)[size_t(oy * ow + ox)] = T(n_real);
                for (int64_t iy = y0; iy < y1; ++iy)
                    for (int64_t ix = x0; ix < x1; ++ix) {
                        const T* xrow = px + (iy * w + ix) * c;
                        for (int64_t ch = 0; ch < c; ++ch) orow[ch] += xrow[ch];
                    }
                for (int64_t ch = 0; ch < c; ++ch) orow[ch] /= T(n_real);
            } else {
                for (int64_t ch = 0; ch < c; ++ch) {
                    T best = px[(y0 * w + x0) * c + ch];
                    int64_t best_at = (y0 * w + x0) * c + ch;
                    for (int64_t iy = y0; iy < y1; ++iy)
                        for (int64_t ix = x0; ix < x1; ++ix) {
                            const T v = px[(iy * w + ix) * c + ch];
                            if (v > best) {
                                best = v;
                                best_at = (iy * w + ix) * c + ch;
                            }
                        }
                    orow[ch] = best;
                    (*argmax)[size_t((oy * ow + ox) * c + ch)] = best_at;
                }
            }
        }
    check_finite(out, "pool2d");

    if (auto* tp = active_tape<T>(); tp && tp->is_tracked(x)) {
        int nx = tp->ensure_node(x);
        const int64_t n_in = x.numel();
        int node = tp->record(
            out.numel(), [nx, mode, argmax, counts, n_in, oh, ow, c, win_h, win_w, stride_h, stride_w, h,
                          w](Tape<T>& t, const std::vector<T>& g) {
                std::vector<T> gx(size_t(n_in), T(0));
                if (mode == PoolMode::Max) {
                    for (size_t i = 0; i < g.size(); ++i) gx[size_t((*argmax)[i])] += g[i];
                } else {
                    for (int64_t oy = 0; oy < oh; ++oy)
                        for (int64_t ox = 0; ox < ow; ++ox) {
                            const int64_t y0 = oy * stride_h, x0 = ox * stride_w;
                            const int64_t y1 = std::min(y0 + win_h, h), x1 = std::min(x0 + win_w, w);
                            const T inv = T(1) / (*counts)[size_t(oy * ow + ox)];
                            const T* grow = g.data() + (oy * ow + ox) * c;
                            for (int64_t iy = y0; iy < y1; ++iy)
                                for (int64_t ix = x0; ix < x1; ++ix) {
                                    T* xrow = gx.data() + (iy * w + ix) * c;
                                    for (int64_t ch = 0; ch < c; ++ch) xrow[ch] += grow[ch] * inv;
                                }
                        }
                }
                t.accum(nx, gx.data(), n_in);
            });
        tp->mark_output(out, node);
    }
    return out;
}

// Mean over both spatial axes: [H, W, C] -> [C].
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
    if (x.rank() != 3) fail_shape("global_avg_pool: expected [H, W, C], got ", shape_str(x.shape));
    const int64_t rows = x.shape[0] * x.shape[1];
    const int64_t c = x.shape[2];
    Tensor<T> out = Tensor<T>::zeros({c});
    const T* px = x.ptr();
    T* po = out.ptr();
    for (int64_t r = 0; r < rows; ++r)
        for (int64_t ch = 0; ch < c; ++ch) po[ch] += px[r * c + ch];
    for (int64_t ch = 0; ch < c; ++ch) po[ch] /= T(rows);
    check_finite(out, "global_avg_pool");
    if (auto* tp = active_tape<T>(); tp && tp->is_tracked(x)) {
        int nx = tp->ensure_node(x);
        int node = tp->record(c, [nx, rows, c](Tape<T>& t, const std::vector<T>& g) {
            std::vector<T> gx(size_t(rows * c));
            const T inv = T(1) / T(rows);
            for (int64_t r = 0; r < rows; ++r)
                for (int64_t ch = 0; ch < c; ++ch) gx[size_t(r * c + ch)] = g[size_t(ch)] * inv;
            t.accum(nx, gx.data(), int64_t(gx.size()));
        });
        tp->mark_output(out, node);
    }
    return out;
}

}  // namespace vistra
