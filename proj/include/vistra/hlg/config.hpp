#pragma once

#include <array>

#include "vistra/common.hpp"

namespace vistra {

enum class WindowEmbedKind { AvgPool, MaxPool, DwConv };
enum class HlgTask { Classify, Segment };
enum class GlobalBiasKind { Relative, Dense };

struct HlgStage {
    int64_t channels = 0;
    int64_t heads = 0;
    int64_t window = 7;
    int64_t dilation = 1;
    int64_t depth = 2;       // sub-layers; paired as plain+dilated
    int64_t mlp_hidden = 0;  // DWMLP expansion width
};

// Four-stage pyramid configuration. Named variants pin (C_i, H_i, R_i, D_i,
// depth_i) per the published table; the DWMLP hidden widths are not published
// and are calibrated against the reported parameter/FLOP budgets.
struct HlgConfig {
    std::array<HlgStage, 4> stages;
    std::string variant;  // non-empty for named variants
    int64_t num_classes = 1000;
    int64_t input = 224;  // native input (sizes the global-bias tables)
    double drop_path = 0.1;
    WindowEmbedKind window_embed = WindowEmbedKind::AvgPool;
    GlobalBiasKind global_bias = GlobalBiasKind::Relative;
    int64_t stem_hidden = 0;  // 0 -> C_1 / 2

    // segmentation head
    int64_t seg_classes = 19;
    int64_t seg_window = 8;
    int64_t seg_dilation = 0;  // 0 -> cover the native H/16 grid
    int64_t seg_pup_channels = 256;

    void finalize() {
        for (const auto& s : stages) {
            if (s.channels <= 0 || s.heads <= 0 || s.mlp_hidden <= 0)
                throw ConfigError("hlg: stage channels/heads/mlp_hidden must be positive");
            if (s.channels % s.heads != 0)
                throw ConfigError(strcat_all("hlg: C=", s.channels, " not divisible by heads=", s.heads));
            if (s.depth % 2 != 0)
                throw ConfigError(strcat_all("hlg: stage depth ", s.depth, " must be even (plain+dilated pairs)"));
        }
        if (seg_dilation == 0) {
            const int64_t grid = std::max<int64_t>(1, input / 16);
            seg_dilation = std::max<int64_t>(1, ceil_div(grid, seg_window));
        }
    }

    int64_t stem_width() const { return stem_hidden > 0 ? stem_hidden : std::max<int64_t>(8, stages[0].channels / 2); }

    int64_t total_depth() const {
        int64_t d = 0;
        for (const auto& s : stages) d += s.depth;
        return d;
    }

    static int64_t se_width(int64_t channels) { return std::max<int64_t>(8, channels / 16); }

    static HlgConfig named(const std::string& name) {
        auto make = [&](std::array<int64_t, 4> c, std::array<int64_t, 4> h, std::array<int64_t, 4> depths,
                        std::array<int64_t, 4> hidden, double dp) {
            HlgConfig cfg;
            const std::array<int64_t, 4> dil = {8, 4, 2, 1};
            for (int i = 0; i < 4; ++i)
                cfg.stages[size_t(i)] = {c[size_t(i)], h[size_t(i)], 7, dil[size_t(i)], depths[size_t(i)],
                                         hidden[size_t(i)]};
            cfg.variant = name;
            cfg.drop_path = dp;
            cfg.finalize();
            return cfg;
        };
        if (name == "hlg-mobile")
            return make({48, 96, 192, 384}, {2, 4, 8, 16}, {2, 2, 2, 2}, {84, 168, 1536, 672}, 0.1);
        if (name == "hlg-tiny")
            return make({64, 128, 256, 512}, {2, 4, 8, 16}, {2, 2, 6, 2}, {96, 224, 1344, 1024}, 0.1);
        if (name == "hlg-small")
            return make({96, 192, 384, 768}, {3, 6, 12, 24}, {2, 2, 6, 2}, {168, 336, 2112, 1344}, 0.1);
        if (name == "hlg-medium")
            return make({96, 192, 384, 768}, {3, 6, 12, 24}, {2, 2, 14, 2}, {168, 336, 2208, 1344}, 0.1);
        if (name == "hlg-large")
            return make({128, 256, 512, 1024}, {4, 8, 16, 32}, {2, 2, 14, 2}, {224, 448, 3328, 1792}, 0.3);
        if (name == "hlg-toy") {
            // calibration config, not a published variant; 128^2 native input
            HlgConfig cfg = make({16, 32, 64, 128}, {1, 2, 4, 8}, {2, 2, 2, 2}, {32, 64, 128, 256}, 0.0);
            cfg.variant = "";
            cfg.input = 128;
            for (auto& s : cfg.stages) s.window = 4;
            cfg.stages[0].dilation = 8;
            cfg.stages[1].dilation = 4;
            cfg.stages[2].dilation = 2;
            cfg.stages[3].dilation = 1;
            cfg.seg_window = 4;
            cfg.seg_dilation = 2;
            cfg.seg_pup_channels = 48;
            cfg.finalize();
            return cfg;
        }
        throw ConfigError("unknown hlg variant '" + name + "'");
    }
};

}  // namespace vistra
