#pragma once

#include <functional>

#include "vistra/ops.hpp"

namespace vistra {

// Overlapping-window inference: run the model on each window, accumulate
// logits, divide by the per-pixel visit count. A window covering the whole
// image degenerates to one direct forward pass.
template <typename T>
Tensor<T> sliding_window_infer(const std::function<Tensor<T>(const Tensor<T>&)>& forward,
                               const Tensor<T>& image, int64_t win, int64_t stride) {
    if (image.rank() != 3) fail_shape("sliding_window_infer: expected [H, W, 3] image");
    const int64_t h = image.shape[0], w = image.shape[1];
    if (win <= 0 || stride <= 0) fail_shape("sliding_window_infer: window/stride must be positive");
    if (win > h || win > w)
        fail_shape("sliding_window_infer: window ", win, " exceeds image ", h, "x", w);
    if (win == h && win == w) return forward(image);

    Tensor<T> acc;  // allocated after the first window fixes K
    std::vector<T> counts(size_t(h * w), T(0));
    auto starts = [&](int64_t extent) {
        std::vector<int64_t> s;
        for (int64_t o = 0;; o += stride) {
            if (o + win >= extent) {
                s.push_back(extent - win);
                break;
            }
            s.push_back(o);
        }
        return s;
    };
    for (int64_t oy : starts(h))
        for (int64_t ox : starts(w)) {
            auto tile = slice(slice(image, 0, oy, win), 1, ox, win);
            auto logits = forward(tile);
            if (logits.shape[0] != win || logits.shape[1] != win)
                fail_shape("sliding_window_infer: model returned ", shape_str(logits.shape), " for a ", win,
                           "-sized window");
            const int64_t k = logits.shape[2];
            if (!acc.data) acc = Tensor<T>::zeros({h, w, k});
            T* pa = acc.ptr();
            const T* pl = logits.ptr();
            for (int64_t y = 0; y < win; ++y)
                for (int64_t x = 0; x < win; ++x) {
                    const int64_t at = (oy + y) * w + ox + x;
                    for (int64_t c = 0; c < k; ++c) pa[at * k + c] += pl[(y * win + x) * k + c];
                    counts[size_t(at)] += T(1);
                }
        }
    const int64_t k = acc.shape[2];
    T* pa = acc.ptr();
    for (int64_t i = 0; i < h * w; ++i)
        for (int64_t c = 0; c < k; ++c) pa[i * k + c] /= counts[size_t(i)];
    return acc;
}

}  // namespace vistra
