#pragma once

#include "vistra/tensor.hpp"

namespace vistra {

// One synthetic segmentation sample: colored geometric shapes on a textured
// background, with an exact per-pixel class mask. Deterministic function of
// (seed, index).
struct SynthSegSample {
    Tensor<float> image;        // [H, W, 3] in [0, 1]
    std::vector<int32_t> mask;  // H*W class ids; 255 = ignore (after padding)
    int64_t height = 0, width = 0;
};

namespace synth {

// Fixed, well-separated palette; class 0 is the background.
inline std::array<float, 3> class_color(int32_t cls, int32_t num_classes) {
    const double hue = double(cls) / double(num_classes) * 6.0;
    const int i = int(hue) % 6;
    const float f = float(hue - std::floor(hue));
    const float v = 0.95f, p = 0.15f;
    const float q = v - (v - p) * f, t = p + (v - p) * f;
    switch (i) {
        case 0: return {v, t, p};
        case 1: return {q, v, p};
        case 2: return {p, v, t};
        case 3: return {p, q, v};
        case 4: return {t, p, v};
        default: return {v, p, q};
    }
}

}  // namespace synth

inline SynthSegSample synth_seg_sample(int64_t index, int64_t h, int64_t w, int32_t num_classes,
                                       uint64_t seed) {
    if (num_classes < 2) throw Error("synth_seg_sample: need at least 2 classes");
    Rng rng(seed * 0x9e3779b97f4a7c15ull + uint64_t(index) * 0xd1b54a32d192ed03ull + 1);
    SynthSegSample s;
    s.height = h;
    s.width = w;
    s.image = Tensor<float>::zeros({h, w, 3});
    s.mask.assign(size_t(h * w), 0);

    // low-contrast textured background
    const double fx = rng.uniform(0.05, 0.25), fy = rng.uniform(0.05, 0.25);
    const double phase = rng.uniform(0, 2 * M_PI);
    const std::array<float, 3> bg = {float(rng.uniform(0.25, 0.45)), float(rng.uniform(0.25, 0.45)),
                                     float(rng.uniform(0.25, 0.45))};
    float* img = s.image.ptr();
    for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x) {
            const float tex = float(0.06 * std::sin(fx * double(x) + fy * double(y) + phase));
            for (int c = 0; c < 3; ++c) img[(y * w + x) * 3 + c] = std::clamp(bg[size_t(c)] + tex, 0.0f, 1.0f);
        }

    // 2-3 large shapes; classes cycle with the index so every class appears
    // in any reasonably sized corpus
    const int shapes = 2 + int(rng.below(2));
    for (int sh = 0; sh < shapes; ++sh) {
        const int32_t cls = 1 + int32_t((index + sh) % (num_classes - 1));
        auto color = synth::class_color(cls, num_classes);
        const float jitter = float(rng.uniform(-0.04, 0.04));
        const double cy = rng.uniform(0.25, 0.75) * double(h);
        const double cx = rng.uniform(0.25, 0.75) * double(w);
        const double size = rng.uniform(0.18, 0.32) * double(std::min(h, w));
        const int kind = int(rng.below(3));
        for (int64_t y = 0; y < h; ++y)
            for (int64_t x = 0; x < w; ++x) {
                const double dy = double(y) - cy, dx = double(x) - cx;
                bool inside = false;
                switch (kind) {
                    case 0:  // disk
                        inside = dy * dy + dx * dx <= size * size;
                        break;
                    case 1:  // axis-aligned square
                        inside = std::fabs(dy) <= size * 0.9 && std::fabs(dx) <= size * 0.9;
                        break;
                    default:  // upward triangle
                        inside = dy <= size * 0.75 && dy >= -size * 0.75 &&
                                 std::fabs(dx) <= (dy + size * 0.75) * 0.6;
                        break;
                }
                if (!inside) continue;
                s.mask[size_t(y * w + x)] = cls;
                for (int c = 0; c < 3; ++c)
                    img[(y * w + x) * 3 + c] = std::clamp(color[size_t(c)] + jitter, 0.0f, 1.0f);
            }
    }
    return s;
}

inline std::vector<SynthSegSample> synth_seg_dataset(int64_t n, int64_t h, int64_t w, int32_t num_classes,
                                                     uint64_t seed) {
    std::vector<SynthSegSample> out;
    out.reserve(size_t(n));
    for (int64_t i = 0; i < n; ++i) out.push_back(synth_seg_sample(i, h, w, num_classes, seed));
    return out;
}

// Image-level label for classification toys: the most frequent non-background
// class (background if none).
inline int32_t dominant_class(const SynthSegSample& s, int32_t num_classes) {
    std::vector<int64_t> hist(size_t(num_classes), 0);
    for (int32_t m : s.mask)
        if (m != 255) hist[size_t(m)]++;
    int32_t best = 0;
    int64_t best_count = -1;
    for (int32_t c = 1; c < num_classes; ++c)
        if (hist[size_t(c)] > best_count) {
            best_count = hist[size_t(c)];
            best = c;
        }
    return best_count > 0 ? best : 0;
}

}  // namespace vistra
