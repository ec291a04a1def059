#pragma once

#include "vistra/tape.hpp"

namespace vistra {

// Train-mode inverted dropout: kept entries are scaled by 1/(1-p).
// Eval mode is the caller's responsibility (just don't call it).
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, Rng& rng) {
    if (p < 0 || p >= 1) throw Error(strcat_all("dropout: probability ", p, " outside [0, 1)"));
    Tensor<T> out = Tensor<T>::zeros(x.shape);
    auto mask = std::make_shared<std::vector<T>>(size_t(x.numel()));
    const T keep_scale = T(1.0 / (1.0 - p));
    const T* px = x.ptr();
    T* po = out.ptr();
    for (int64_t i = 0; i < x.numel(); ++i) {
        const T m = rng.uniform() < p ? T(0) : keep_scale;
        (*mask)[size_t(i)] = m;
        po[i] = px[i] * m;
    }
    check_finite(out, "dropout");
    if (auto* tp = active_tape<T>(); tp && tp->is_tracked(x)) {
        int nx = tp->ensure_node(x);
        int node = tp->record(out.numel(), [nx, mask](Tape<T>& t, const std::vector<T>& g) {
            std::vector<T> gx(g.size());
            for (size_t i = 0; i < g.size(); ++i) gx[i] = g[i] * (*mask)[i];
            t.accum(nx, gx.data(), int64_t(gx.size()));
        });
        tp->mark_output(out, node);
    }
    return out;
}

// Stochastic depth: one coin per call drops the whole tensor (the residual
// branch) or rescales it by 1/(1-p).
template <typename T>
Tensor<T> drop_path(const Tensor<T>& x, double p, Rng& rng) {
    if (p < 0 || p >= 1) throw Error(strcat_all("drop_path: probability ", p, " outside [0, 1)"));
    const T m = rng.uniform() < p ? T(0) : T(1.0 / (1.0 - p));
    return scale(x, m);
}

}  // namespace vistra
