#pragma once

#include "vistra/analyze/targets.hpp"
#include "vistra/hlg/backbone.hpp"
#include "vistra/io/config.hpp"
#include "vistra/setr/model.hpp"
#include "vistra/train/trainer.hpp"

namespace vistra {

// A run's model: exactly one of the two families, plus the settings shared
// by the commands.
struct BuiltModel {
    std::unique_ptr<SetrModel<float>> setr;
    std::unique_ptr<HlgModel<float>> hlg;
    HlgTask task = HlgTask::Segment;
    int64_t input = 0;
    int64_t num_classes = 0;
    std::string description;

    bool is_setr() const { return setr != nullptr; }

    SegmentationOutput<float> forward_segment(const Tensor<float>& image, RunContext& ctx) {
        return setr ? setr->forward_segment(image, ctx) : hlg->forward_segment(image, ctx);
    }
    ParamStore<float>& params() { return setr ? setr->params() : hlg->params(); }
};

namespace factory {

inline SetrConfig setr_from_config(const RunConfig& cfg) {
    const std::string preset = cfg.get_str("model", "preset");
    SetrConfig sc;
    if (preset == "setr-toy") {
        sc.layers = 2;
        sc.hidden = 64;
        sc.heads = 4;
        sc.patch = 8;
        sc.input = 64;
        sc.num_classes = 4;
        sc.pup_channels = 48;
        sc.aux_enabled = false;
        sc.decoder = SetrDecoderKind::Pup;
    } else if (!preset.empty()) {
        // setr-naive | setr-pup | setr-mla (+ backbone)
        const std::string dec = preset.substr(std::string("setr-").size());
        sc = setr_variant(dec, cfg.get_str("model", "backbone", "t-large"));
    } else {
        sc.layers = cfg.get_int("model", "layers", 24);
        sc.hidden = cfg.get_int("model", "hidden", 1024);
        sc.heads = cfg.get_int("model", "heads", 16);
        sc.mlp_ratio = cfg.get_int("model", "mlp_ratio", 4);
        const std::string dec = cfg.get_str("model", "decoder", "pup");
        if (dec == "naive")
            sc.decoder = SetrDecoderKind::Naive;
        else if (dec == "pup")
            sc.decoder = SetrDecoderKind::Pup;
        else if (dec == "mla")
            sc.decoder = SetrDecoderKind::Mla;
        else
            cfg.fail_at("model", "decoder", "invalid decoder '" + dec + "' (naive|pup|mla)");
    }
    if (cfg.has("model", "patch")) sc.patch = cfg.get_int("model", "patch", sc.patch);
    if (cfg.has("model", "input")) sc.input = cfg.get_int("model", "input", sc.input);
    if (cfg.has("model", "num_classes")) sc.num_classes = cfg.get_int("model", "num_classes", sc.num_classes);
    if (cfg.has("model", "pup_channels")) sc.pup_channels = cfg.get_int("model", "pup_channels", sc.pup_channels);
    if (cfg.has("model", "mla_streams")) sc.mla_streams = cfg.get_int("model", "mla_streams", sc.mla_streams);
    if (cfg.has("model", "aux")) sc.aux_enabled = cfg.get_bool("model", "aux", sc.aux_enabled);
    sc.finalize();
    return sc;
}

inline HlgConfig hlg_from_config(const RunConfig& cfg) {
    const std::string preset = cfg.get_str("model", "preset");
    HlgConfig hc;
    if (!preset.empty()) {
        hc = HlgConfig::named(preset);
    } else {
        auto channels = cfg.get_int_list("model", "channels");
        auto heads = cfg.get_int_list("model", "heads");
        auto depths = cfg.get_int_list("model", "depths", {2, 2, 2, 2});
        auto dilations = cfg.get_int_list("model", "dilations", {8, 4, 2, 1});
        auto hidden = cfg.get_int_list("model", "mlp_hidden");
        if (channels.size() != 4 || heads.size() != 4 || depths.size() != 4 || dilations.size() != 4 ||
            hidden.size() != 4)
            cfg.fail_at("model", "channels",
                        "explicit hlg models need 4-entry channels/heads/depths/dilations/mlp_hidden");
        const int64_t window = cfg.get_int("model", "window", 7);
        for (int i = 0; i < 4; ++i)
            hc.stages[size_t(i)] = {channels[size_t(i)], heads[size_t(i)], window, dilations[size_t(i)],
                                    depths[size_t(i)], hidden[size_t(i)]};
    }
    if (cfg.has("model", "input")) hc.input = cfg.get_int("model", "input", hc.input);
    if (cfg.has("model", "num_classes")) hc.num_classes = cfg.get_int("model", "num_classes", hc.num_classes);
    if (cfg.has("model", "drop_path")) hc.drop_path = cfg.get_double("model", "drop_path", hc.drop_path);
    if (cfg.has("model", "seg_window")) hc.seg_window = cfg.get_int("model", "seg_window", hc.seg_window);
    if (cfg.has("model", "seg_dilation")) hc.seg_dilation = cfg.get_int("model", "seg_dilation", 0);
    if (cfg.has("model", "seg_pup_channels"))
        hc.seg_pup_channels = cfg.get_int("model", "seg_pup_channels", hc.seg_pup_channels);
    const std::string we = cfg.get_str("model", "window_embed", "avg");
    if (we == "avg")
        hc.window_embed = WindowEmbedKind::AvgPool;
    else if (we == "max")
        hc.window_embed = WindowEmbedKind::MaxPool;
    else if (we == "dwconv")
        hc.window_embed = WindowEmbedKind::DwConv;
    else
        cfg.fail_at("model", "window_embed", "invalid window_embed '" + we + "' (avg|max|dwconv)");
    const std::string gb = cfg.get_str("model", "global_bias", "relative");
    if (gb == "relative")
        hc.global_bias = GlobalBiasKind::Relative;
    else if (gb == "dense")
        hc.global_bias = GlobalBiasKind::Dense;
    else
        cfg.fail_at("model", "global_bias", "invalid global_bias '" + gb + "' (relative|dense)");
    // segmentation class count rides on num_classes for segment-task runs
    if (cfg.get_str("model", "task", "segment") == "segment" && cfg.has("model", "num_classes"))
        hc.seg_classes = cfg.get_int("model", "num_classes", hc.seg_classes);
    hc.finalize();
    return hc;
}

}  // namespace factory

inline bool is_hlg_model(const RunConfig& cfg) {
    const std::string preset = cfg.get_str("model", "preset");
    if (!preset.empty()) return preset.rfind("hlg", 0) == 0;
    const std::string kind = cfg.get_str("model", "kind");
    if (kind == "hlg") return true;
    if (kind == "setr") return false;
    throw ConfigError(cfg.path + ": [model] needs either preset=... or kind=setr|hlg");
}

inline BuiltModel build_model(const RunConfig& cfg, uint64_t seed, bool zero_init = false) {
    BuiltModel built;
    if (is_hlg_model(cfg)) {
        auto hc = factory::hlg_from_config(cfg);
        const std::string task = cfg.get_str("model", "task", "segment");
        if (task != "segment" && task != "classify")
            cfg.fail_at("model", "task", "invalid task '" + task + "' (segment|classify)");
        built.task = task == "segment" ? HlgTask::Segment : HlgTask::Classify;
        built.input = hc.input;
        built.num_classes = built.task == HlgTask::Segment ? hc.seg_classes : hc.num_classes;
        built.description = hc.variant.empty() ? "hlg" : hc.variant;
        built.hlg = std::make_unique<HlgModel<float>>(hc, built.task, seed, zero_init);
    } else {
        auto sc = factory::setr_from_config(cfg);
        built.task = HlgTask::Segment;
        built.input = sc.input;
        built.num_classes = sc.num_classes;
        built.description = "setr";
        built.setr = std::make_unique<SetrModel<float>>(sc, seed, zero_init);
    }
    return built;
}

inline std::vector<SynthSegSample> corpus_from_config(const RunConfig& cfg, const BuiltModel& model) {
    const std::string kind = cfg.get_str("data", "kind", "synth-seg");
    if (kind != "synth-seg")
        throw ConfigError(cfg.path + ": data.kind '" + kind + "' is not usable for training (synth-seg only)");
    const int64_t h = cfg.get_int("data", "height", model.input);
    const int64_t w = cfg.get_int("data", "width", model.input);
    const int64_t n = cfg.get_int("data", "count", 16);
    const int32_t k = int32_t(cfg.get_int("data", "classes", model.num_classes));
    const uint64_t seed = uint64_t(cfg.get_int("data", "seed", 7));
    return synth_seg_dataset(n, h, w, k, seed);
}

inline TrainRecipe recipe_from_config(const RunConfig& cfg) {
    TrainRecipe r;
    r.optimizer = cfg.get_str("recipe", "optimizer", "sgd-poly");
    r.base_lr = cfg.get_double("recipe", "base_lr", r.optimizer == "sgd-poly" ? 0.01 : 0.001);
    r.iters = cfg.get_int("recipe", "iters", 1000);
    r.batch = cfg.get_int("recipe", "batch", 2);
    r.momentum = cfg.get_double("recipe", "momentum", 0.9);
    r.weight_decay = cfg.get_double("recipe", "weight_decay", r.optimizer == "adamw-cosine" ? 0.05 : 0.0);
    r.power = cfg.get_double("recipe", "power", 0.9);
    r.warmup = cfg.get_int("recipe", "warmup", 0);
    r.min_lr = cfg.get_double("recipe", "min_lr", 0.0);
    r.aux_weight = cfg.get_double("recipe", "aux_weight", cfg.get_double("model", "aux_weight", 0.4));
    r.eval_interval = cfg.get_int("recipe", "eval_interval", 100);
    r.checkpoint_interval = cfg.get_int("recipe", "checkpoint_interval", 0);
    r.seed = uint64_t(cfg.get_int("recipe", "seed", 42));
    r.deterministic = cfg.get_bool("recipe", "deterministic", true);
    r.use_augment = cfg.get_bool("recipe", "augment", false);
    if (r.use_augment) {
        r.augment.resize_min = cfg.get_double("recipe", "resize_min", 0.5);
        r.augment.resize_max = cfg.get_double("recipe", "resize_max", 2.0);
        r.augment.crop_h = r.augment.crop_w = cfg.get_int("recipe", "crop", 0);
    }
    return r;
}

}  // namespace vistra
