// Command-line front end: train / eval / analyze / visualize over the
// sectioned key=value run configs. See README for the config grammar.
#include <CLI11.hpp>
#include <iostream>

#include "vistra/runtime/factory.hpp"
#include "vistra/runtime/visualize.hpp"

using namespace vistra;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    uint64_t seed = 0;
    bool seed_set = false;
    bool deterministic = false;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required = true) {
    auto* c = cmd->add_option("--config", args.config_path, "run configuration file");
    if (config_required) c->required();
    cmd->add_option("--out", args.out_dir, "output directory (overrides [output] dir)");
    cmd->add_option("--seed", args.seed, "seed override")->each([&](const std::string&) { args.seed_set = true; });
    cmd->add_flag("--deterministic", args.deterministic, "force deterministic mode");
}

RunConfig load_config(const CommonArgs& args) { return RunConfig::parse_file(args.config_path); }

std::string resolve_out(const CommonArgs& args, const RunConfig& cfg, bool required = true) {
    std::string dir = !args.out_dir.empty() ? args.out_dir : cfg.get_str("output", "dir");
    if (dir.empty() && required)
        throw ConfigError("no output directory: set [output] dir in the config or pass --out");
    return dir;
}

TrainRecipe resolve_recipe(const CommonArgs& args, const RunConfig& cfg) {
    TrainRecipe recipe = recipe_from_config(cfg);
    if (args.seed_set) recipe.seed = args.seed;
    if (args.deterministic) recipe.deterministic = true;
    return recipe;
}

int cmd_train(const CommonArgs& args, const std::string& resume_path, int64_t max_steps) {
    auto cfg = load_config(args);
    auto recipe = resolve_recipe(args, cfg);
    const std::string out = resolve_out(args, cfg);
    auto model = build_model(cfg, recipe.seed);
    auto corpus = corpus_from_config(cfg, model);
    const uint64_t fingerprint = cfg.model_fingerprint();

    std::ostringstream log;
    auto flush_log = [&] { write_file_atomic(out + "/metrics.log", log.str()); };
    const int64_t stop_at = max_steps > 0 ? std::min(max_steps, recipe.iters) : recipe.iters;

    if (model.task == HlgTask::Classify) {
        ClsTrainer trainer(*model.hlg, corpus, recipe, fingerprint);
        trainer.run(stop_at, log);
        flush_log();
        trainer.save(out + "/checkpoint.bin");
        std::cout << "trained " << model.description << " for " << trainer.step() << " steps; final top-1 "
                  << trainer.evaluate_top1() << "\n";
        return 0;
    }

    auto run_seg = [&](auto& m) {
        using M = std::remove_reference_t<decltype(m)>;
        SegTrainer<M> trainer(m, corpus, recipe, fingerprint);
        if (!resume_path.empty()) trainer.restore(load_checkpoint(resume_path));
        const int64_t ckpt_every = recipe.checkpoint_interval;
        while (trainer.step() < stop_at) {
            const int64_t next = ckpt_every > 0
                                     ? std::min(stop_at, trainer.step() + ckpt_every)
                                     : stop_at;
            trainer.run(next, log);
            flush_log();
            if (ckpt_every > 0 && trainer.step() < stop_at)
                trainer.save(strcat_all(out, "/checkpoint_step", trainer.step(), ".bin"));
        }
        trainer.save(out + "/checkpoint.bin");
        auto ev = trainer.evaluate();
        std::cout << "trained " << model.description << " for " << trainer.step()
                  << " steps; pixel_acc " << ev.pixel_acc << " miou " << ev.miou << "\n";
    };
    if (model.is_setr())
        run_seg(*model.setr);
    else
        run_seg(*model.hlg);
    return 0;
}

int cmd_eval(const CommonArgs& args, std::string checkpoint, int64_t window, int64_t stride,
             bool force_load) {
    auto cfg = load_config(args);
    const std::string out = resolve_out(args, cfg, /*required=*/false);
    auto recipe = resolve_recipe(args, cfg);
    auto model = build_model(cfg, recipe.seed);
    if (checkpoint.empty() && !out.empty()) checkpoint = out + "/checkpoint.bin";
    if (!checkpoint.empty() && std::filesystem::exists(checkpoint))
        restore_into(load_checkpoint(checkpoint), model.params(), cfg.model_fingerprint(), force_load);
    else if (!checkpoint.empty())
        throw IoError("checkpoint not found: " + checkpoint);

    auto corpus = corpus_from_config(cfg, model);
    RunContext ctx;
    NoGradScope<float> nograd;

    if (model.task == HlgTask::Classify) {
        int64_t hit = 0;
        const int32_t k = int32_t(model.num_classes);
        for (const auto& s : corpus) {
            auto logits = model.hlg->forward_classify(s.image, ctx);
            int32_t best = 0;
            float bv = (*logits.data)[0];
            for (int64_t c = 1; c < logits.shape[0]; ++c)
                if ((*logits.data)[size_t(c)] > bv) {
                    bv = (*logits.data)[size_t(c)];
                    best = int32_t(c);
                }
            hit += best == dominant_class(s, k);
        }
        std::cout << "top1=" << double(hit) / double(corpus.size()) << " over " << corpus.size()
                  << " samples\n";
        return 0;
    }

    ConfusionMatrix cm(int32_t(model.num_classes));
    for (size_t i = 0; i < corpus.size(); ++i) {
        const auto& s = corpus[i];
        Tensor<float> logits;
        if (window > 0) {
            auto fwd = [&](const Tensor<float>& tile) {
                return model.forward_segment(const_cast<Tensor<float>&>(tile), ctx).logits;
            };
            logits = sliding_window_infer<float>(fwd, s.image, window, stride > 0 ? stride : window);
        } else {
            logits = model.forward_segment(s.image, ctx).logits;
        }
        auto pred = argmax_mask(logits);
        cm.add(pred, s.mask);
        if (!out.empty()) {
            std::vector<uint8_t> bytes(pred.size());
            for (size_t j = 0; j < pred.size(); ++j) bytes[j] = uint8_t(pred[j]);
            write_pgm(strcat_all(out, "/pred_", i, ".pgm"), s.width, s.height, bytes);
        }
    }
    auto [per, mean] = cm.miou();
    std::cout << "pixel_acc=" << cm.pixel_accuracy() << " miou=" << mean << "\n";
    for (size_t c = 0; c < per.size(); ++c)
        if (per[c] >= 0) std::cout << "iou.class" << c << "=" << per[c] << "\n";
    return 0;
}

int cmd_analyze(const CommonArgs& args) {
    auto cfg = load_config(args);
    const std::string out = resolve_out(args, cfg, /*required=*/false);
    CostReport report;
    std::string variant;
    if (is_hlg_model(cfg)) {
        auto hc = factory::hlg_from_config(cfg);
        const std::string task = cfg.get_str("model", "task", "segment");
        const int64_t input = cfg.get_int("model", "input", hc.input);
        report = analyze_hlg(hc, task == "classify" ? HlgTask::Classify : HlgTask::Segment, input);
        variant = hc.variant;
    } else {
        auto sc = factory::setr_from_config(cfg);
        report = analyze_setr(sc, sc.input);
        const std::string preset = cfg.get_str("model", "preset");
        variant = preset;
    }
    std::string text = report.to_text();

    // audits against the published figures for named variants
    std::vector<AuditLine> audits;
    for (const auto& t : hlg_targets())
        if (variant == t.variant) {
            audits.push_back(audit_value("params", double(report.total_params()), t.params, kHlgParamTol));
            if (t.macs > 0)
                audits.push_back(audit_value("macs", double(report.total_macs()), t.macs, kHlgMacsTol));
        }
    for (const auto& t : setr_targets())
        if (variant == std::string("setr-") + t.decoder &&
            cfg.get_str("model", "backbone", "t-large") == t.backbone)
            audits.push_back(audit_value("params", double(report.total_params()), t.params, kSetrParamTol));
    for (const auto& a : audits)
        text += strcat_all(a.pass ? "[PASS] " : "[FAIL] ", a.name, ": ", a.actual, " vs ", a.expected,
                           " (tolerance ", a.tolerance * 100, "%)\n");

    std::cout << text;
    if (!out.empty()) {
        write_file_atomic(out + "/cost_report.txt", text);
        write_file_atomic(out + "/cost_report.kv", report.to_kv());
    }
    for (const auto& a : audits)
        if (!a.pass) return 1;
    return 0;
}

int cmd_visualize(const CommonArgs& args, const std::string& checkpoint, VisualizeRequest req,
                  const std::string& point, bool force_load) {
    auto cfg = load_config(args);
    const std::string out = resolve_out(args, cfg);
    auto recipe = resolve_recipe(args, cfg);
    auto model = build_model(cfg, recipe.seed);
    if (!checkpoint.empty())
        restore_into(load_checkpoint(checkpoint), model.params(), cfg.model_fingerprint(), force_load);
    if (!point.empty()) {
        const auto comma = point.find(',');
        if (comma == std::string::npos) throw ConfigError("--point expects 'row,col'");
        req.point_r = std::stoll(point.substr(0, comma));
        req.point_c = std::stoll(point.substr(comma + 1));
    }
    const std::string path = run_visualization(model, cfg, req, out);
    std::cout << "wrote " << path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SETR / HLG transformers: training, evaluation, cost analysis and visualization"};
    app.require_subcommand(1);

    CommonArgs train_args, eval_args, analyze_args, viz_args;
    std::string resume_path, eval_checkpoint, viz_checkpoint, viz_point;
    int64_t max_steps = 0;
    int64_t eval_window = 0, eval_stride = 0;
    bool eval_force = false, viz_force = false;
    VisualizeRequest viz_req;

    auto* train = app.add_subcommand("train", "train a model on the synthetic corpus");
    add_common(train, train_args);
    train->add_option("--resume", resume_path, "checkpoint to resume from");
    train->add_option("--max-steps", max_steps, "stop after this step (resume later to finish)");

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint (mIoU / top-1)");
    add_common(eval, eval_args);
    eval->add_option("--checkpoint", eval_checkpoint, "checkpoint path (default <out>/checkpoint.bin)");
    eval->add_option("--window", eval_window, "sliding-window size (default: whole image)");
    eval->add_option("--stride", eval_stride, "sliding-window stride");
    eval->add_flag("--force-load", eval_force, "ignore config fingerprint mismatch");

    auto* analyze = app.add_subcommand("analyze", "parameter / FLOP report and audits");
    add_common(analyze, analyze_args);

    auto* viz = app.add_subcommand("visualize", "emit PGM visualizations");
    add_common(viz, viz_args);
    viz->add_option("--checkpoint", viz_checkpoint, "checkpoint to load");
    viz->add_option("--what", viz_req.what, "pos-sim | attention | features")->required();
    viz->add_option("--layer", viz_req.layer, "1-based layer (or hlg stage)");
    viz->add_option("--head", viz_req.head, "1-based attention head");
    viz->add_option("--point", viz_point, "query point 'row,col' on the token grid");
    viz->add_option("--image-index", viz_req.image_index, "corpus sample to feed");
    viz->add_flag("--force-load", viz_force, "ignore config fingerprint mismatch");

    try {
        app.parse(argc, argv);
        if (train->parsed()) return cmd_train(train_args, resume_path, max_steps);
        if (eval->parsed()) return cmd_eval(eval_args, eval_checkpoint, eval_window, eval_stride, eval_force);
        if (analyze->parsed()) return cmd_analyze(analyze_args);
        if (viz->parsed()) return cmd_visualize(viz_args, viz_checkpoint, viz_req, viz_point, viz_force);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const TrainDivergence& e) {
        std::cerr << "training diverged: " << e.what() << "\n";
        return 3;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 4;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
