#pragma once

#include <vector>

#include "vistra/common.hpp"

namespace vistra {

enum class SetrDecoderKind { Naive, Pup, Mla };

// Encoder table ("T-Base": 12 layers, hidden 768, 12 heads; "T-Large": 24
// layers, hidden 1024, 16 heads) plus decoder/head settings. `input` is the
// native square input the learned position table is sized for; other
// P-divisible inputs interpolate it.
struct SetrConfig {
    int64_t layers = 24;
    int64_t hidden = 1024;
    int64_t heads = 16;
    int64_t patch = 16;
    int64_t mlp_ratio = 4;
    int64_t input = 768;
    int64_t num_classes = 19;

    SetrDecoderKind decoder = SetrDecoderKind::Pup;
    int64_t mla_streams = 4;
    int64_t pup_channels = 512;
    int64_t aux_channels = 256;
    bool aux_enabled = true;
    std::vector<int64_t> aux_taps;  // 1-based encoder layer indices
    std::vector<int64_t> mla_taps;  // 1-based, size mla_streams

    static SetrConfig t_base() {
        SetrConfig c;
        c.layers = 12;
        c.hidden = 768;
        c.heads = 12;
        return c;
    }

    static SetrConfig t_large() { return SetrConfig{}; }

    // Auxiliary-head taps: Naive (Z10, Z15, Z20), PUP (Z10, Z15, Z20, Z24),
    // MLA (Z6, Z12, Z18, Z24) on the 24-layer encoder; scaled proportionally
    // for other depths.
    void finalize() {
        if (hidden % heads != 0)
            throw ConfigError(strcat_all("setr: hidden ", hidden, " not divisible by heads ", heads));
        if (input % patch != 0)
            throw ConfigError(strcat_all("setr: input ", input, " not divisible by patch ", patch));
        if (decoder == SetrDecoderKind::Mla) {
            if (mla_streams < 1 || mla_streams > layers)
                throw ConfigError(strcat_all("setr: ", mla_streams, " mla streams for ", layers, " layers"));
            if (mla_taps.empty()) {
                for (int64_t m = 1; m <= mla_streams; ++m) mla_taps.push_back(m * layers / mla_streams);
            }
            if (int64_t(mla_taps.size()) != mla_streams)
                throw ConfigError("setr: mla tap count must equal stream count");
        } else {
            mla_taps.clear();
        }
        if (aux_enabled && aux_taps.empty()) {
            std::vector<int64_t> base;
            switch (decoder) {
                case SetrDecoderKind::Naive: base = {10, 15, 20}; break;
                case SetrDecoderKind::Pup: base = {10, 15, 20, 24}; break;
                case SetrDecoderKind::Mla: base = {6, 12, 18, 24}; break;
            }
            for (int64_t t : base) {
                int64_t scaled = std::max<int64_t>(1, (t * layers + 12) / 24);
                if (aux_taps.empty() || aux_taps.back() != scaled) aux_taps.push_back(scaled);
            }
        }
        for (int64_t t : aux_taps)
            if (t < 1 || t > layers)
                throw ConfigError(strcat_all("setr: aux tap Z^", t, " outside [1, ", layers, "]"));
        for (int64_t t : mla_taps)
            if (t < 1 || t > layers)
                throw ConfigError(strcat_all("setr: mla tap Z^", t, " outside [1, ", layers, "]"));
    }

    int64_t head_dim() const { return hidden / heads; }
    int64_t tokens_per_side() const { return input / patch; }
    int64_t token_count() const { return tokens_per_side() * tokens_per_side(); }
};

}  // namespace vistra
