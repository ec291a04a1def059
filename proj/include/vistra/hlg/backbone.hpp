#pragma once

#include "vistra/hlg/layer.hpp"
#include "vistra/setr/decoder.hpp"

namespace vistra {

// Stage outputs at strides 4, 8, 16, 32.
template <typename T>
using FeaturePyramid = std::array<Tensor<T>, 4>;

// Four-stage hierarchical local-global backbone with a classification head,
// or with the stride-16 fuse + HLG pair + progressive-upsampling
// segmentation head.
template <typename T>
class HlgModel {
public:
    HlgModel(HlgConfig config, HlgTask task, uint64_t init_seed = 42, bool zero_init = false)
        : cfg_(std::move(config)), task_(task), params_(init_seed, zero_init) {
        cfg_.finalize();
        const int64_t stem_h = cfg_.stem_width();
        const int64_t c1 = cfg_.stages[0].channels;
        stem1_ = Conv2d<T>(params_, "stem.conv1", 3, 3, 3, stem_h, 2, 1);
        stem2_ = Conv2d<T>(params_, "stem.conv2", 1, 1, stem_h, stem_h, 1, 0);
        stem3_ = Conv2d<T>(params_, "stem.conv3", 3, 3, stem_h, c1, 2, 1);
        stem_ln_ = LayerNorm<T>(params_, "stem.ln", c1);

        const int64_t total = cfg_.total_depth();
        int64_t sub_index = 0;
        auto rate = [&](int64_t j) {
            return total > 1 ? cfg_.drop_path * double(j) / double(total - 1) : 0.0;
        };
        for (int i = 0; i < 4; ++i) {
            const auto& st = cfg_.stages[size_t(i)];
            const int64_t native = std::max<int64_t>(1, ceil_div(cfg_.input, int64_t(4) << i));
            const int64_t c_prev = i == 0 ? st.channels : cfg_.stages[size_t(i - 1)].channels;
            std::vector<HlgLayerPair<T>> pairs;
            for (int64_t p = 0; p < st.depth / 2; ++p) {
                const bool transition = (i > 0 && p == 0);
                pairs.emplace_back(params_, strcat_all("stage", i, ".pair", p),
                                   transition ? c_prev : st.channels, st.channels, st.mlp_hidden,
                                   transition ? 2 : 1, st.heads, st.window, st.dilation, native, native, cfg_,
                                   rate(sub_index), rate(sub_index + 1));
                sub_index += 2;
            }
            stages_.push_back(std::move(pairs));
            out_norms_.emplace_back(params_, strcat_all("stage", i, ".out_ln"), st.channels);
        }

        if (task_ == HlgTask::Classify) {
            head_ = Linear<T>(params_, "head", cfg_.stages[3].channels, cfg_.num_classes);
        } else {
            int64_t cat = 0;
            for (const auto& s : cfg_.stages) cat += s.channels;
            const int64_t c3 = cfg_.stages[2].channels;
            const int64_t native16 = std::max<int64_t>(1, cfg_.input / 16);
            fuse_ = Conv2d<T>(params_, "seg.fuse", 1, 1, cat, c3, 1, 0);
            seg_pair_ = std::make_unique<HlgLayerPair<T>>(
                params_, "seg.pair", c3, c3, cfg_.stages[2].mlp_hidden, 1, cfg_.stages[2].heads,
                cfg_.seg_window, cfg_.seg_dilation, native16, native16, cfg_, 0.0, 0.0);
            pup_ = std::make_unique<PupHead<T>>(params_, "seg.pup", c3, cfg_.seg_pup_channels,
                                                cfg_.seg_classes, 16);
        }
    }

    // Stage outputs (each passed through its output norm).
    FeaturePyramid<T> forward_features(const Tensor<T>& image, RunContext& ctx) const {
        Tensor<T> x;
        {
            OpLabel scope("stem");
            x = stem_ln_.forward(gelu(stem3_.forward(gelu(stem2_.forward(gelu(stem1_.forward(image)))))));
        }
        FeaturePyramid<T> pyramid;
        for (size_t i = 0; i < 4; ++i) {
            OpLabel scope(strcat_all("stage", i));
            for (const auto& pair : stages_[i]) x = pair.forward(x, ctx);
            pyramid[i] = out_norms_[i].forward(x);
        }
        return pyramid;
    }

    Tensor<T> forward_classify(const Tensor<T>& image, RunContext& ctx) const {
        if (task_ != HlgTask::Classify) throw Error("model was built for segmentation");
        auto pyramid = forward_features(image, ctx);
        OpLabel scope("head");
        auto pooled = reshape(global_avg_pool(pyramid[3]), {1, cfg_.stages[3].channels});
        return reshape(head_.forward(pooled), {cfg_.num_classes});
    }

    // Interpolate all four stage maps to stride 16, concat, fuse to the
    // stage-3 width, run one plain+dilated HLG pair, then PUP to full
    // resolution.
    SegmentationOutput<T> forward_segment(const Tensor<T>& image, RunContext& ctx) {
        if (task_ != HlgTask::Segment) throw Error("model was built for classification");
        const int64_t h = image.shape[0], w = image.shape[1];
        auto pyramid = forward_features(image, ctx);
        OpLabel scope("seg");
        const int64_t gh = pyramid[2].shape[0], gw = pyramid[2].shape[1];
        std::vector<Tensor<T>> resized;
        for (auto& f : pyramid) resized.push_back(bilinear_resize(f, gh, gw));
        auto fused = fuse_.forward(concat(resized, -1));
        auto refined = seg_pair_->forward(fused, ctx);
        SegmentationOutput<T> out;
        out.logits = pup_->forward(refined, ctx);
        if (out.logits.shape[0] != h || out.logits.shape[1] != w)
            out.logits = bilinear_resize(out.logits, h, w);
        return out;
    }

    const HlgConfig& config() const { return cfg_; }
    HlgTask task() const { return task_; }
    ParamStore<T>& params() { return params_; }
    const ParamStore<T>& params() const { return params_; }
    const std::vector<std::vector<HlgLayerPair<T>>>& stages() const { return stages_; }

private:
    HlgConfig cfg_;
    HlgTask task_;
    ParamStore<T> params_;
    Conv2d<T> stem1_, stem2_, stem3_;
    LayerNorm<T> stem_ln_;
    std::vector<std::vector<HlgLayerPair<T>>> stages_;
    std::vector<LayerNorm<T>> out_norms_;
    Linear<T> head_;
    Conv2d<T> fuse_;
    std::unique_ptr<HlgLayerPair<T>> seg_pair_;
    std::unique_ptr<PupHead<T>> pup_;
};

}  // namespace vistra
