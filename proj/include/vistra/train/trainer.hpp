#pragma once

#include <optional>

#include "vistra/data/augment.hpp"
#include "vistra/hlg/backbone.hpp"
#include "vistra/io/checkpoint.hpp"
#include "vistra/train/infer.hpp"
#include "vistra/train/loss.hpp"
#include "vistra/train/metrics.hpp"
#include "vistra/train/optim.hpp"

namespace vistra {

class TrainDivergence : public Error {
public:
    explicit TrainDivergence(const std::string& what) : Error(what) {}
};

struct TrainRecipe {
    std::string optimizer = "sgd-poly";  // or "adamw-cosine"
    double base_lr = 0.01;
    int64_t iters = 1000;
    int64_t batch = 2;
    double momentum = 0.9;
    double weight_decay = 0.0;  // 0.05 default for adamw (set by config layer)
    double power = 0.9;
    int64_t warmup = 0;
    double min_lr = 0.0;
    double aux_weight = 0.4;
    int64_t eval_interval = 100;
    int64_t checkpoint_interval = 0;  // 0: final checkpoint only
    uint64_t seed = 42;
    bool deterministic = true;
    bool use_augment = false;
    AugmentConfig augment;
};

namespace detail {
inline std::string fmt_metric(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}
}  // namespace detail

struct EvalResult {
    double pixel_acc = 0;
    double miou = 0;
    std::vector<double> per_class;
};

// Desk-scale segmentation training loop: gradient accumulation over the
// batch, one optimizer step per iteration, metric log lines in key=value
// form. Deterministic given the seed (single logical thread).
template <typename Model>
class SegTrainer {
public:
    SegTrainer(Model& model, std::vector<SynthSegSample> corpus, TrainRecipe recipe, uint64_t fingerprint)
        : model_(model), corpus_(std::move(corpus)), recipe_(recipe), fingerprint_(fingerprint),
          rng_(recipe.seed) {
        if (corpus_.empty()) throw Error("training corpus is empty");
        if (recipe_.optimizer == "sgd-poly") {
            sgd_.schedule = {recipe_.base_lr, recipe_.power, recipe_.iters};
            sgd_.momentum = recipe_.momentum;
            sgd_.weight_decay = recipe_.weight_decay;
        } else if (recipe_.optimizer == "adamw-cosine") {
            adamw_.schedule = {recipe_.base_lr, recipe_.min_lr, recipe_.warmup, recipe_.iters};
            adamw_.weight_decay = recipe_.weight_decay;
        } else {
            throw ConfigError("unknown optimizer '" + recipe_.optimizer + "'");
        }
    }

    // Runs steps [current, until) and appends log lines to `log`.
    void run(int64_t until, std::ostream& log) {
        until = std::min(until, recipe_.iters);
        while (step_ < until) {
            const double loss = train_step();
            const double lr = current_lr();
            log << "step=" << step_ << " loss=" << detail::fmt_metric(loss)
                << " lr=" << detail::fmt_metric(lr);
            if (recipe_.eval_interval > 0 &&
                (step_ % recipe_.eval_interval == 0 || step_ == recipe_.iters)) {
                auto ev = evaluate();
                log << " pixel_acc=" << detail::fmt_metric(ev.pixel_acc)
                    << " miou=" << detail::fmt_metric(ev.miou);
            }
            log << "\n";
            log.flush();
        }
    }

    double train_step() {
        const int64_t n = int64_t(corpus_.size());
        model_.params().zero_grads();
        double loss_sum = 0;
        for (int64_t b = 0; b < recipe_.batch; ++b) {
            const auto& base = corpus_[size_t(rng_.below(uint64_t(n)))];
            SynthSegSample sample =
                recipe_.use_augment ? augment(base, recipe_.augment, rng_) : clone_sample(base);
            Tape<float> tape;
            TapeScope<float> scope(tape);
            RunContext ctx{true, &rng_};
            try {
                auto out = model_.forward_segment(sample.image, ctx);
                auto loss = seg_loss(out, sample.mask, recipe_.aux_weight);
                if (!std::isfinite(double(loss.item())))
                    throw TrainDivergence(strcat_all("loss diverged at step ", step_ + 1));
                loss_sum += double(loss.item());
                tape.backward(scale(loss, float(1.0 / double(recipe_.batch))));
            } catch (const NumericError& e) {
                throw TrainDivergence(strcat_all("non-finite values at step ", step_ + 1, ": ", e.what()));
            }
        }
        if (recipe_.optimizer == "sgd-poly")
            sgd_.step(model_.params(), step_);
        else
            adamw_.step(model_.params(), step_);
        ++step_;
        return loss_sum / double(recipe_.batch);
    }

    EvalResult evaluate() {
        ConfusionMatrix cm(static_cast<int32_t>(num_classes()));
        RunContext ctx;  // eval mode
        NoGradScope<float> nograd;
        for (const auto& s : corpus_) {
            auto out = model_.forward_segment(s.image, ctx);
            cm.add(argmax_mask(out.logits), s.mask);
        }
        auto [per, mean] = cm.miou();
        return {cm.pixel_accuracy(), mean, per};
    }

    void save(const std::string& path) {
        auto entries = views_of(model_.params());
        for (auto& v : opt_state_views()) entries.push_back(v);
        std::map<std::string, uint64_t> meta;
        meta["step"] = uint64_t(step_);
        meta["adamw_steps"] = uint64_t(adamw_.step_count());
        const uint64_t* s = rng_.state();
        for (int i = 0; i < 4; ++i) meta[strcat_all("rng", i)] = s[i];
        save_checkpoint(path, entries, fingerprint_, meta);
    }

    void restore(const LoadedCheckpoint& ck) {
        restore_into(ck, model_.params(), fingerprint_);
        // optimizer state: created lazily, so force allocation via a lookup
        touch_optimizer();
        size_t vi = 0;
        for (auto& e : model_.params().entries()) {
            if (!e.learnable) continue;
            auto load_into = [&](std::vector<float>& dst, const std::string& prefix) {
                const auto* src = ck.find(prefix + e.name);
                if (!src) throw IoError("checkpoint missing optimizer state for " + e.name);
                if (int64_t(dst.size()) != numel(src->shape)) throw IoError("optimizer state size mismatch");
                for (size_t i = 0; i < dst.size(); ++i) dst[i] = float(src->values[i]);
            };
            if (recipe_.optimizer == "sgd-poly") {
                load_into(sgd_.state()[vi], "__opt.v.");
            } else {
                load_into(adamw_.state_m()[vi], "__opt.m.");
                load_into(adamw_.state_v()[vi], "__opt.v.");
            }
            ++vi;
        }
        step_ = int64_t(ck.meta.at("step"));
        adamw_.step_count() = int64_t(ck.meta.count("adamw_steps") ? ck.meta.at("adamw_steps") : 0);
        uint64_t s[4];
        for (int i = 0; i < 4; ++i) s[i] = ck.meta.at(strcat_all("rng", i));
        rng_.set_state(s);
    }

    int64_t step() const { return step_; }
    double current_lr() const {
        return recipe_.optimizer == "sgd-poly" ? sgd_.schedule.lr(step_) : adamw_.schedule.lr(step_);
    }
    const TrainRecipe& recipe() const { return recipe_; }
    const std::vector<SynthSegSample>& corpus() const { return corpus_; }

private:
    int64_t num_classes() const { return num_classes_of(model_); }

    static SynthSegSample clone_sample(const SynthSegSample& s) {
        return {s.image.clone(), s.mask, s.height, s.width};
    }

    void touch_optimizer() {
        if (recipe_.optimizer == "sgd-poly")
            sgd_.ensure(model_.params());
        else
            adamw_.ensure(model_.params());
    }

    std::vector<TensorView<float>> opt_state_views() {
        touch_optimizer();
        std::vector<TensorView<float>> views;
        size_t vi = 0;
        for (auto& e : model_.params().entries()) {
            if (!e.learnable) continue;
            if (recipe_.optimizer == "sgd-poly") {
                views.push_back({"__opt.v." + e.name, e.tensor.shape, sgd_.state()[vi].data(), false});
            } else {
                views.push_back({"__opt.m." + e.name, e.tensor.shape, adamw_.state_m()[vi].data(), false});
                views.push_back({"__opt.v." + e.name, e.tensor.shape, adamw_.state_v()[vi].data(), false});
            }
            ++vi;
        }
        return views;
    }

    Model& model_;
    std::vector<SynthSegSample> corpus_;
    TrainRecipe recipe_;
    uint64_t fingerprint_;
    Rng rng_;
    int64_t step_ = 0;
    SgdOptimizer<float> sgd_;
    AdamWOptimizer<float> adamw_;

    template <typename M>
    static int64_t num_classes_of(const M& m) {
        if constexpr (requires { m.config().num_classes; } && requires { m.config().decoder; })
            return m.config().num_classes;  // SETR
        else
            return m.config().seg_classes;  // HLG
    }
};

// Classification loop for HLG backbones on the synthetic corpus (label =
// dominant shape class). Shares the recipe and persistence machinery.
class ClsTrainer {
public:
    ClsTrainer(HlgModel<float>& model, std::vector<SynthSegSample> corpus, TrainRecipe recipe,
               uint64_t fingerprint)
        : model_(model), corpus_(std::move(corpus)), recipe_(recipe), fingerprint_(fingerprint),
          rng_(recipe.seed) {
        if (corpus_.empty()) throw Error("training corpus is empty");
        const int32_t k = int32_t(model_.config().num_classes);
        for (const auto& s : corpus_) labels_.push_back(dominant_class(s, k));
        if (recipe_.optimizer == "sgd-poly") {
            sgd_.schedule = {recipe_.base_lr, recipe_.power, recipe_.iters};
            sgd_.momentum = recipe_.momentum;
            sgd_.weight_decay = recipe_.weight_decay;
        } else if (recipe_.optimizer == "adamw-cosine") {
            adamw_.schedule = {recipe_.base_lr, recipe_.min_lr, recipe_.warmup, recipe_.iters};
            adamw_.weight_decay = recipe_.weight_decay;
        } else {
            throw ConfigError("unknown optimizer '" + recipe_.optimizer + "'");
        }
    }

    void run(int64_t until, std::ostream& log) {
        until = std::min(until, recipe_.iters);
        while (step_ < until) {
            const double loss = train_step();
            log << "step=" << step_ << " loss=" << detail::fmt_metric(loss)
                << " lr=" << detail::fmt_metric(current_lr());
            if (recipe_.eval_interval > 0 &&
                (step_ % recipe_.eval_interval == 0 || step_ == recipe_.iters))
                log << " top1=" << detail::fmt_metric(evaluate_top1());
            log << "\n";
            log.flush();
        }
    }

    double train_step() {
        const int64_t n = int64_t(corpus_.size());
        model_.params().zero_grads();
        double loss_sum = 0;
        for (int64_t b = 0; b < recipe_.batch; ++b) {
            const size_t at = size_t(rng_.below(uint64_t(n)));
            Tape<float> tape;
            TapeScope<float> scope(tape);
            RunContext ctx{true, &rng_};
            try {
                auto logits = model_.forward_classify(corpus_[at].image, ctx);
                auto loss = softmax_cross_entropy(reshape(logits, {1, logits.shape[0]}), {labels_[at]});
                loss_sum += double(loss.item());
                tape.backward(scale(loss, float(1.0 / double(recipe_.batch))));
            } catch (const NumericError& e) {
                throw TrainDivergence(strcat_all("non-finite values at step ", step_ + 1, ": ", e.what()));
            }
        }
        if (recipe_.optimizer == "sgd-poly")
            sgd_.step(model_.params(), step_);
        else
            adamw_.step(model_.params(), step_);
        ++step_;
        return loss_sum / double(recipe_.batch);
    }

    double evaluate_top1() {
        RunContext ctx;
        NoGradScope<float> nograd;
        int64_t hit = 0;
        for (size_t i = 0; i < corpus_.size(); ++i) {
            auto logits = model_.forward_classify(corpus_[i].image, ctx);
            int32_t best = 0;
            float bv = (*logits.data)[0];
            for (int64_t c = 1; c < logits.shape[0]; ++c)
                if ((*logits.data)[size_t(c)] > bv) {
                    bv = (*logits.data)[size_t(c)];
                    best = int32_t(c);
                }
            hit += best == labels_[i];
        }
        return double(hit) / double(corpus_.size());
    }

    void save(const std::string& path) {
        std::map<std::string, uint64_t> meta;
        meta["step"] = uint64_t(step_);
        const uint64_t* s = rng_.state();
        for (int i = 0; i < 4; ++i) meta[strcat_all("rng", i)] = s[i];
        save_checkpoint(path, model_.params(), fingerprint_, meta);
    }

    int64_t step() const { return step_; }
    double current_lr() const {
        return recipe_.optimizer == "sgd-poly" ? sgd_.schedule.lr(step_) : adamw_.schedule.lr(step_);
    }

private:
    HlgModel<float>& model_;
    std::vector<SynthSegSample> corpus_;
    std::vector<int32_t> labels_;
    TrainRecipe recipe_;
    uint64_t fingerprint_;
    Rng rng_;
    int64_t step_ = 0;
    SgdOptimizer<float> sgd_;
    AdamWOptimizer<float> adamw_;
};

}  // namespace vistra
