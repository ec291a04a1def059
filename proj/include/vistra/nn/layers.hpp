#pragma once

#include "vistra/nn/params.hpp"
#include "vistra/ops.hpp"

namespace vistra {

// Per-forward execution context: train/eval switch plus the RNG that drives
// dropout, drop-path and batch ordering. One logical thread per step.
struct RunContext {
    bool training = false;
    Rng* rng = nullptr;

    Rng& rand() {
        if (!rng) throw Error("RunContext: rng required in training mode");
        return *rng;
    }
};

template <typename T>
struct Linear {
    Tensor<T> weight;  // [in, out]
    Tensor<T> bias;    // [out]

    Linear() = default;
    Linear(ParamStore<T>& ps, const std::string& name, int64_t in, int64_t out)
        : weight(ps.param(name + ".weight", {in, out})), bias(ps.param(name + ".bias", {out}, Init::Zeros)) {}

    Tensor<T> forward(const Tensor<T>& x) const { return add_suffix(matmul(x, weight), bias); }
};

template <typename T>
struct LayerNorm {
    Tensor<T> gamma, beta;
    T eps = T(1e-5);

    LayerNorm() = default;
    LayerNorm(ParamStore<T>& ps, const std::string& name, int64_t c)
        : gamma(ps.param(name + ".gamma", {c}, Init::Ones)), beta(ps.param(name + ".beta", {c}, Init::Zeros)) {}

    Tensor<T> forward(const Tensor<T>& x) const { return layer_norm(x, gamma, beta, eps); }
};

template <typename T>
struct Conv2d {
    Tensor<T> kernel;  // [kh, kw, C_in/g, C_out]
    Tensor<T> bias;    // [C_out], optional
    int64_t stride = 1, pad = 0, groups = 1;
    bool has_bias = true;

    Conv2d() = default;
    Conv2d(ParamStore<T>& ps, const std::string& name, int64_t kh, int64_t kw, int64_t c_in, int64_t c_out,
           int64_t stride_, int64_t pad_, int64_t groups_ = 1, bool bias_ = true, Init init = Init::TruncNormal)
        : stride(stride_), pad(pad_), groups(groups_), has_bias(bias_) {
        kernel = ps.param(name + ".kernel", {kh, kw, c_in / groups_, c_out}, init);
        if (has_bias) bias = ps.param(name + ".bias", {c_out}, Init::Zeros);
    }

    Tensor<T> forward(const Tensor<T>& x) const {
        return conv2d(x, kernel, has_bias ? &bias : nullptr, stride, pad, groups);
    }
};

template <typename T>
struct BatchNorm2d {
    Tensor<T> gamma, beta;
    Tensor<T> running_mean, running_var;
    T momentum = T(0.1);
    T eps = T(1e-5);

    BatchNorm2d() = default;
    BatchNorm2d(ParamStore<T>& ps, const std::string& name, int64_t c)
        : gamma(ps.param(name + ".gamma", {c}, Init::Ones)),
          beta(ps.param(name + ".beta", {c}, Init::Zeros)),
          running_mean(ps.buffer(name + ".running_mean", {c}, Init::Zeros)),
          running_var(ps.buffer(name + ".running_var", {c}, Init::Ones)) {}

    Tensor<T> forward(const Tensor<T>& x, const RunContext& ctx) {
        return batch_norm_2d(x, gamma, beta, running_mean, running_var, ctx.training, momentum, eps);
    }
};

}  // namespace vistra
