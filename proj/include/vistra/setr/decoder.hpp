#pragma once

#include "vistra/setr/encoder.hpp"

namespace vistra {

// Full-resolution class logits plus any auxiliary maps (training only).
template <typename T>
struct SegmentationOutput {
    Tensor<T> logits;                // [H, W, K]
    std::vector<Tensor<T>> aux_logits;
};

// Tokens back to the spatial map they were cut from (row-major inverse of
// sequentialization; zero-copy).
template <typename T>
Tensor<T> reshape_tokens(const TokenSequence<T>& z) {
    if (z.grid_h * z.grid_w != z.length())
        fail_shape("reshape_tokens: grid ", z.grid_h, "x", z.grid_w, " does not cover ", z.length(), " tokens");
    return reshape(z.tokens, {z.grid_h, z.grid_w, z.channels()});
}

// Naive head: 1x1 conv + BN + ReLU + 1x1 conv to K classes, then one
// bilinear jump to full resolution.
template <typename T>
struct NaiveHead {
    Conv2d<T> conv1, conv2;
    BatchNorm2d<T> bn;

    NaiveHead() = default;
    NaiveHead(ParamStore<T>& ps, const std::string& name, int64_t c, int64_t k)
        : conv1(ps, name + ".conv1", 1, 1, c, c, 1, 0),
          conv2(ps, name + ".conv2", 1, 1, c, k, 1, 0),
          bn(ps, name + ".bn", c) {}

    Tensor<T> forward(const Tensor<T>& feat, int64_t out_h, int64_t out_w, RunContext& ctx) {
        auto x = relu(bn.forward(conv1.forward(feat), ctx));
        return bilinear_resize(conv2.forward(x), out_h, out_w);
    }
};

// Progressive upsampling: alternating (3x3 conv + BN + ReLU, bilinear x2)
// blocks from stride P to full resolution, then a 1x1 classifier.
template <typename T>
struct PupHead {
    std::vector<Conv2d<T>> convs;
    std::vector<BatchNorm2d<T>> bns;
    Conv2d<T> classifier;

    PupHead() = default;
    PupHead(ParamStore<T>& ps, const std::string& name, int64_t c_in, int64_t width, int64_t k, int64_t stride) {
        int64_t steps = 0;
        for (int64_t s = stride; s > 1; s /= 2) {
            if (s % 2 != 0) throw ConfigError(strcat_all("pup: stride ", stride, " is not a power of two"));
            ++steps;
        }
        int64_t in = c_in;
        for (int64_t i = 0; i < steps; ++i) {
            convs.emplace_back(ps, strcat_all(name, ".conv", i), 3, 3, in, width, 1, 1);
            bns.emplace_back(ps, strcat_all(name, ".bn", i), width);
            in = width;
        }
        classifier = Conv2d<T>(ps, name + ".classifier", 1, 1, in, k, 1, 0);
    }

    Tensor<T> forward(const Tensor<T>& feat, RunContext& ctx) {
        auto x = feat;
        for (size_t i = 0; i < convs.size(); ++i) {
            x = relu(bns[i].forward(convs[i].forward(x), ctx));
            x = bilinear_resize(x, x.shape[0] * 2, x.shape[1] * 2);
        }
        return classifier.forward(x);
    }
};

// One MLA stream: 1x1 channel cut, neighbor aggregation, an extra 3x3 conv
// on the aggregated feature, two more 3x3 convs, bilinear x4.
template <typename T>
struct MlaStream {
    Conv2d<T> squeeze;   // 1x1, C -> C/4
    Conv2d<T> agg_conv;  // 3x3 after the element-wise addition
    Conv2d<T> conv2, conv3;
    BatchNorm2d<T> bn_s, bn_a, bn_2, bn_3;

    MlaStream() = default;
    MlaStream(ParamStore<T>& ps, const std::string& name, int64_t c, int64_t width)
        : squeeze(ps, name + ".squeeze", 1, 1, c, width, 1, 0),
          agg_conv(ps, name + ".agg", 3, 3, width, width, 1, 1),
          conv2(ps, name + ".conv2", 3, 3, width, width, 1, 1),
          conv3(ps, name + ".conv3", 3, 3, width, width, 1, 1),
          bn_s(ps, name + ".bn_s", width),
          bn_a(ps, name + ".bn_a", width),
          bn_2(ps, name + ".bn_2", width),
          bn_3(ps, name + ".bn_3", width) {}

    Tensor<T> pre_agg(const Tensor<T>& feat, RunContext& ctx) {
        return relu(bn_s.forward(squeeze.forward(feat), ctx));
    }

    Tensor<T> post_agg(const Tensor<T>& agg, RunContext& ctx) {
        auto x = relu(bn_a.forward(agg_conv.forward(agg), ctx));
        x = relu(bn_2.forward(conv2.forward(x), ctx));
        x = relu(bn_3.forward(conv3.forward(x), ctx));
        return bilinear_resize(x, x.shape[0] * 4, x.shape[1] * 4);
    }
};

// Multi-level aggregation head over M uniformly spaced encoder taps.
// Aggregation is a single top-down hop: every stream adds its next-deeper
// neighbor's squeezed feature (the deepest adds its own), which keeps all
// streams structurally identical.
template <typename T>
struct MlaHead {
    std::vector<MlaStream<T>> streams;
    Conv2d<T> classifier;
    int64_t width = 0;

    MlaHead() = default;
    MlaHead(ParamStore<T>& ps, const std::string& name, int64_t c, int64_t m, int64_t k) : width(c / 4) {
        for (int64_t s = 0; s < m; ++s) streams.emplace_back(ps, strcat_all(name, ".stream", s), c, width);
        classifier = Conv2d<T>(ps, name + ".classifier", 1, 1, width * m, k, 1, 0);
    }

    // taps ordered shallow -> deep
    Tensor<T> forward(const std::vector<Tensor<T>>& taps, int64_t out_h, int64_t out_w, RunContext& ctx) {
        const size_t m = streams.size();
        if (taps.size() != m)
            fail_shape("mla: got ", taps.size(), " taps for ", m, " streams");
        std::vector<Tensor<T>> squeezed(m);
        for (size_t s = 0; s < m; ++s) squeezed[s] = streams[s].pre_agg(taps[s], ctx);
        std::vector<Tensor<T>> fused(m);
        for (size_t s = 0; s < m; ++s) {
            const size_t deeper = std::min(s + 1, m - 1);
            fused[s] = add(squeezed[s], squeezed[deeper]);
        }
        std::vector<Tensor<T>> ups(m);
        for (size_t s = 0; s < m; ++s) ups[s] = streams[s].post_agg(fused[s], ctx);
        auto cat = concat(ups, -1);
        return bilinear_resize(classifier.forward(cat), out_h, out_w);
    }
};

// 2-layer auxiliary head (1x1 conv + BN + ReLU + 1x1 conv) upsampled to full
// resolution; used only for the training loss.
template <typename T>
struct AuxHead {
    Conv2d<T> conv1, conv2;
    BatchNorm2d<T> bn;

    AuxHead() = default;
    AuxHead(ParamStore<T>& ps, const std::string& name, int64_t c, int64_t hidden, int64_t k)
        : conv1(ps, name + ".conv1", 1, 1, c, hidden, 1, 0),
          conv2(ps, name + ".conv2", 1, 1, hidden, k, 1, 0),
          bn(ps, name + ".bn", hidden) {}

    Tensor<T> forward(const Tensor<T>& feat, int64_t out_h, int64_t out_w, RunContext& ctx) {
        auto x = relu(bn.forward(conv1.forward(feat), ctx));
        return bilinear_resize(conv2.forward(x), out_h, out_w);
    }
};

}  // namespace vistra
