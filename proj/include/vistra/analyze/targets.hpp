#pragma once

#include "vistra/analyze/cost.hpp"

namespace vistra {

// Published budget figures the audits check against. Parameter counts come
// from the segmentation and classification tables; the "flops" column of the
// classification table follows the community 1 x MAC convention, so audits
// compare it with CostReport::total_macs().
struct HlgTarget {
    const char* variant;
    double params;        // classification model at 224^2, 1000 classes
    double macs;          // at 224^2; 0 when not audited
};

inline const std::vector<HlgTarget>& hlg_targets() {
    static const std::vector<HlgTarget> t = {
        {"hlg-mobile", 4.3e6, 0.0},  // FLOPs not part of the audit set
        {"hlg-tiny", 11.0e6, 2.1e9},
        {"hlg-small", 24.2e6, 4.7e9},
        {"hlg-medium", 43.7e6, 9.0e9},
        {"hlg-large", 84.2e6, 15.9e9},
    };
    return t;
}
inline constexpr double kHlgParamTol = 0.05;
inline constexpr double kHlgMacsTol = 0.10;

// Cityscapes segmentation setting: 768^2 crops, 19 classes.
struct SetrTarget {
    const char* decoder;
    const char* backbone;
    double params;
};

inline const std::vector<SetrTarget>& setr_targets() {
    static const std::vector<SetrTarget> t = {
        {"naive", "t-large", 305.67e6}, {"pup", "t-large", 318.31e6}, {"mla", "t-large", 310.57e6},
        {"naive", "t-base", 87.69e6},   {"pup", "t-base", 97.64e6},   {"mla", "t-base", 92.59e6},
    };
    return t;
}
inline constexpr double kSetrParamTol = 0.02;

inline SetrConfig setr_variant(const std::string& decoder, const std::string& backbone) {
    SetrConfig cfg = backbone == "t-base" ? SetrConfig::t_base() : SetrConfig::t_large();
    if (backbone != "t-base" && backbone != "t-large")
        throw ConfigError("unknown setr backbone '" + backbone + "'");
    if (decoder == "naive")
        cfg.decoder = SetrDecoderKind::Naive;
    else if (decoder == "pup")
        cfg.decoder = SetrDecoderKind::Pup;
    else if (decoder == "mla")
        cfg.decoder = SetrDecoderKind::Mla;
    else
        throw ConfigError("unknown setr decoder '" + decoder + "'");
    cfg.finalize();
    return cfg;
}

}  // namespace vistra
