#pragma once

#include "vistra/data/synth.hpp"
#include "vistra/ops/resize.hpp"

namespace vistra {

// Random resize (0.5-2.0), random crop and random horizontal flip. The mask
// is transformed with the same geometry: nearest-neighbor resampling, ignore
// padding when the crop exceeds the resized extents.
struct AugmentConfig {
    double resize_min = 0.5;
    double resize_max = 2.0;
    int64_t crop_h = 0, crop_w = 0;  // 0 -> keep the sample size
};

namespace detail {

inline std::vector<int32_t> resize_mask_nearest(const std::vector<int32_t>& mask, int64_t h, int64_t w,
                                                int64_t oh, int64_t ow) {
    std::vector<int32_t> out(size_t(oh * ow));
    for (int64_t y = 0; y < oh; ++y) {
        const int64_t sy = std::clamp(int64_t(std::lround((double(y) + 0.5) * double(h) / double(oh) - 0.5)),
                                      int64_t(0), h - 1);
        for (int64_t x = 0; x < ow; ++x) {
            const int64_t sx = std::clamp(
                int64_t(std::lround((double(x) + 0.5) * double(w) / double(ow) - 0.5)), int64_t(0), w - 1);
            out[size_t(y * ow + x)] = mask[size_t(sy * w + sx)];
        }
    }
    return out;
}

}  // namespace detail

inline SynthSegSample hflip(const SynthSegSample& s) {
    SynthSegSample out;
    out.height = s.height;
    out.width = s.width;
    out.image = Tensor<float>::zeros({s.height, s.width, 3});
    out.mask.assign(size_t(s.height * s.width), 0);
    const float* src = s.image.ptr();
    float* dst = out.image.ptr();
    for (int64_t y = 0; y < s.height; ++y)
        for (int64_t x = 0; x < s.width; ++x) {
            const int64_t mx = s.width - 1 - x;
            for (int c = 0; c < 3; ++c) dst[(y * s.width + x) * 3 + c] = src[(y * s.width + mx) * 3 + c];
            out.mask[size_t(y * s.width + x)] = s.mask[size_t(y * s.width + mx)];
        }
    return out;
}

inline SynthSegSample augment(const SynthSegSample& s, const AugmentConfig& cfg, Rng& rng) {
    const double ratio = rng.uniform(cfg.resize_min, cfg.resize_max);
    const int64_t rh = std::max<int64_t>(1, int64_t(std::lround(double(s.height) * ratio)));
    const int64_t rw = std::max<int64_t>(1, int64_t(std::lround(double(s.width) * ratio)));

    SynthSegSample r;
    r.height = rh;
    r.width = rw;
    r.image = (rh == s.height && rw == s.width) ? s.image.clone() : bilinear_resize(s.image, rh, rw);
    r.mask = (rh == s.height && rw == s.width) ? s.mask : detail::resize_mask_nearest(s.mask, s.height, s.width, rh, rw);

    const int64_t ch = cfg.crop_h > 0 ? cfg.crop_h : s.height;
    const int64_t cw = cfg.crop_w > 0 ? cfg.crop_w : s.width;
    SynthSegSample out;
    out.height = ch;
    out.width = cw;
    out.image = Tensor<float>::zeros({ch, cw, 3});
    out.mask.assign(size_t(ch * cw), kIgnoreIndex);
    const int64_t off_y = rh > ch ? int64_t(rng.below(uint64_t(rh - ch + 1))) : 0;
    const int64_t off_x = rw > cw ? int64_t(rng.below(uint64_t(rw - cw + 1))) : 0;
    const float* src = r.image.ptr();
    float* dst = out.image.ptr();
    for (int64_t y = 0; y < std::min(ch, rh); ++y) {
        for (int64_t x = 0; x < std::min(cw, rw); ++x) {
            for (int c = 0; c < 3; ++c)
                dst[(y * cw + x) * 3 + c] = src[((y + off_y) * rw + x + off_x) * 3 + c];
            out.mask[size_t(y * cw + x)] = r.mask[size_t((y + off_y) * rw + x + off_x)];
        }
    }
    if (rng.uniform() < 0.5) out = hflip(out);
    return out;
}

}  // namespace vistra
