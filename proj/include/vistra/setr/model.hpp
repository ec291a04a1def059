#pragma once

#include "vistra/setr/decoder.hpp"

namespace vistra {

// SETR segmenter: ViT encoder + one of the three decoder heads + aux heads.
template <typename T>
class SetrModel {
public:
    SetrModel(SetrConfig config, uint64_t init_seed = 42, bool zero_init = false)
        : cfg_(std::move(config)), params_(init_seed, zero_init) {
        cfg_.finalize();
        encoder_ = std::make_unique<SetrEncoder<T>>(params_, cfg_);
        switch (cfg_.decoder) {
            case SetrDecoderKind::Naive:
                naive_ = std::make_unique<NaiveHead<T>>(params_, "decoder", cfg_.hidden, cfg_.num_classes);
                break;
            case SetrDecoderKind::Pup:
                pup_ = std::make_unique<PupHead<T>>(params_, "decoder", cfg_.hidden, cfg_.pup_channels,
                                                    cfg_.num_classes, cfg_.patch);
                break;
            case SetrDecoderKind::Mla:
                mla_ = std::make_unique<MlaHead<T>>(params_, "decoder", cfg_.hidden, cfg_.mla_streams,
                                                    cfg_.num_classes);
                break;
        }
        if (cfg_.aux_enabled) {
            for (size_t i = 0; i < cfg_.aux_taps.size(); ++i)
                aux_heads_.emplace_back(params_, strcat_all("aux", i), cfg_.hidden, cfg_.aux_channels,
                                        cfg_.num_classes);
        }
    }

    SegmentationOutput<T> forward_segment(const Tensor<T>& image, RunContext& ctx,
                                          std::vector<Tensor<T>>* attn_capture = nullptr) {
        const int64_t h = image.shape[0], w = image.shape[1];
        auto zs = encoder_->encode(image, attn_capture);
        SegmentationOutput<T> out;
        {
            OpLabel scope("decoder");
            auto last = zs.back();
            last.tokens = encoder_->final_norm(last.tokens);
            auto feat = reshape_tokens(last);
            switch (cfg_.decoder) {
                case SetrDecoderKind::Naive:
                    out.logits = naive_->forward(feat, h, w, ctx);
                    break;
                case SetrDecoderKind::Pup:
                    out.logits = pup_->forward(feat, ctx);
                    break;
                case SetrDecoderKind::Mla: {
                    std::vector<Tensor<T>> taps;
                    for (int64_t t : cfg_.mla_taps) taps.push_back(reshape_tokens(zs[size_t(t - 1)]));
                    out.logits = mla_->forward(taps, h, w, ctx);
                    break;
                }
            }
        }
        if (ctx.training && !aux_heads_.empty()) {
            OpLabel scope("aux");
            for (size_t i = 0; i < aux_heads_.size(); ++i) {
                auto feat = reshape_tokens(zs[size_t(cfg_.aux_taps[i] - 1)]);
                out.aux_logits.push_back(aux_heads_[i].forward(feat, h, w, ctx));
            }
        }
        return out;
    }

    // Encoder outputs only (visualization, tests).
    std::vector<TokenSequence<T>> encode(const Tensor<T>& image,
                                         std::vector<Tensor<T>>* attn_capture = nullptr) const {
        return encoder_->encode(image, attn_capture);
    }

    const SetrConfig& config() const { return cfg_; }
    ParamStore<T>& params() { return params_; }
    const ParamStore<T>& params() const { return params_; }
    SetrEncoder<T>& encoder() { return *encoder_; }

private:
    SetrConfig cfg_;
    ParamStore<T> params_;
    std::unique_ptr<SetrEncoder<T>> encoder_;
    std::unique_ptr<NaiveHead<T>> naive_;
    std::unique_ptr<PupHead<T>> pup_;
    std::unique_ptr<MlaHead<T>> mla_;
    std::vector<AuxHead<T>> aux_heads_;
};

}  // namespace vistra
