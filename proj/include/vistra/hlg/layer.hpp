#pragma once

#include "vistra/hlg/config.hpp"
#include "vistra/hlg/window.hpp"
#include "vistra/nn/layers.hpp"

namespace vistra {

// Zero-pad at the bottom/right edges to reach [target_h, target_w].
template <typename T>
Tensor<T> pad2d_br(const Tensor<T>& x, int64_t target_h, int64_t target_w) {
    if (x.rank() != 3) fail_shape("pad2d_br: expected [H, W, C]");
    const int64_t h = x.shape[0], w = x.shape[1], c = x.shape[2];
    if (target_h < h || target_w < w) fail_shape("pad2d_br: target smaller than input");
    if (target_h == h && target_w == w) return x;
    Tensor<T> out = Tensor<T>::zeros({target_h, target_w, c});
    const T* src = x.ptr();
    T* dst = out.ptr();
    for (int64_t r = 0; r < h; ++r) std::memcpy(dst + r * target_w * c, src + r * w * c, size_t(w * c) * sizeof(T));
    if (auto* tp = active_tape<T>(); tp && tp->is_tracked(x)) {
        int nx = tp->ensure_node(x);
        int node = tp->record(out.numel(), [nx, h, w, c, target_w](Tape<T>& t, const std::vector<T>& g) {
            std::vector<T> gx(size_t(h * w * c));
            for (int64_t r = 0; r < h; ++r)
                std::memcpy(gx.data() + r * w * c, g.data() + r * target_w * c, size_t(w * c) * sizeof(T));
            t.accum(nx, gx.data(), int64_t(gx.size()));
        });
        tp->mark_output(out, node);
    }
    return out;
}

// One C-vector summary per R x R window (the compact global map Z_G).
// Pooling modes handle non-divisible grids with real-count averaging; the
// learned depth-wise mode pads with zeros first.
template <typename T>
struct WindowEmbedding {
    WindowEmbedKind kind = WindowEmbedKind::AvgPool;
    int64_t window = 7;
    Conv2d<T> conv;  // DwConv mode only

    WindowEmbedding() = default;
    WindowEmbedding(ParamStore<T>& ps, const std::string& name, int64_t c, int64_t r, WindowEmbedKind k)
        : kind(k), window(r) {
        if (kind == WindowEmbedKind::DwConv)
            conv = Conv2d<T>(ps, name + ".conv", r, r, c, c, r, 0, /*groups=*/c);
    }

    Tensor<T> forward(const Tensor<T>& x) const {
        switch (kind) {
            case WindowEmbedKind::AvgPool:
                return pool2d(x, window, window, window, window, PoolMode::Avg, /*ceil_mode=*/true);
            case WindowEmbedKind::MaxPool:
                return pool2d(x, window, window, window, window, PoolMode::Max, /*ceil_mode=*/true);
            case WindowEmbedKind::DwConv: {
                const int64_t ph = ceil_div(x.shape[0], window) * window;
                const int64_t pw = ceil_div(x.shape[1], window) * window;
                return conv.forward(pad2d_br(x, ph, pw));
            }
        }
        throw Error("window_embedding: unsupported mode");
    }
};

// Local windowed attention (plain or dilated) followed by global attention
// over window embeddings. Q/K/V/O projections are shared between the two;
// global queries are formed as Q_L = Q_W + DWConv(V_W) so no projection over
// the full map is repeated.
template <typename T>
struct HlgAttention {
    LayerNorm<T> ln_local, ln_global;
    Linear<T> wq, wk, wv, wo;
    Tensor<T> bw_table;  // [H, (2R-1)^2]
    Tensor<T> bg_table;  // relative: [H, (2G0-1)R, (2G0-1)R]; dense: [H, N0, G0]
    Conv2d<T> fixup;     // 3x3 depth-wise, zero-init
    WindowEmbedding<T> embed;
    int64_t heads = 1, window = 7;
    GlobalBiasKind bias_kind = GlobalBiasKind::Relative;
    int64_t native_wins_h = 1, native_wins_w = 1;
    std::shared_ptr<std::vector<int64_t>> bw_index;  // [S*S] into the (2R-1)^2 table

    HlgAttention() = default;
    HlgAttention(ParamStore<T>& ps, const std::string& name, int64_t c, int64_t h, int64_t r,
                 int64_t native_grid_h, int64_t native_grid_w, WindowEmbedKind embed_kind,
                 GlobalBiasKind bias_kind_)
        : ln_local(ps, name + ".ln_local", c),
          ln_global(ps, name + ".ln_global", c),
          wq(ps, name + ".wq", c, c),
          wk(ps, name + ".wk", c, c),
          wv(ps, name + ".wv", c, c),
          wo(ps, name + ".wo", c, c),
          fixup(ps, name + ".fixup", 3, 3, c, c, 1, 1, /*groups=*/c, /*bias=*/true, Init::Zeros),
          embed(ps, name + ".embed", c, r, embed_kind),
          heads(h),
          window(r),
          bias_kind(bias_kind_) {
        bw_table = ps.param(name + ".bw", {h, (2 * r - 1) * (2 * r - 1)});
        native_wins_h = ceil_div(native_grid_h, r);
        native_wins_w = ceil_div(native_grid_w, r);
        if (bias_kind == GlobalBiasKind::Relative) {
            bg_table = ps.param(name + ".bg", {h, (2 * native_wins_h - 1) * r, (2 * native_wins_w - 1) * r});
        } else {
            bg_table =
                ps.param(name + ".bg", {h, native_grid_h * native_grid_w, native_wins_h * native_wins_w});
        }
        const int64_t s = r * r;
        bw_index = std::make_shared<std::vector<int64_t>>(size_t(s * s));
        for (int64_t qi = 0; qi < r; ++qi)
            for (int64_t qj = 0; qj < r; ++qj)
                for (int64_t ki = 0; ki < r; ++ki)
                    for (int64_t kj = 0; kj < r; ++kj)
                        (*bw_index)[size_t((qi * r + qj) * s + ki * r + kj)] =
                            (qi - ki + r - 1) * (2 * r - 1) + (qj - kj + r - 1);
    }

    // B_W realized as [H, R^2, R^2]; lookups depend only on (drow, dcol)
    // between query and key slots.
    Tensor<T> local_bias() const {
        const int64_t s = window * window;
        return reshape(index_select(bw_table, 1, *bw_index), {heads, s, s});
    }

    // B_G realized as [H, N, G]; relative mode indexes by the query position
    // offset from each window origin and interpolates the table when the
    // runtime grid differs from the native one.
    Tensor<T> global_bias(int64_t nh, int64_t nw, int64_t gh, int64_t gw) const {
        const int64_t n = nh * nw, g = gh * gw;
        if (bias_kind == GlobalBiasKind::Dense) {
            if (bg_table.shape[1] != n || bg_table.shape[2] != g)
                throw ConfigError(strcat_all("dense global bias was built for a ", bg_table.shape[1], "x",
                                             bg_table.shape[2], " grid; got ", n, "x", g,
                                             " (dense mode does not interpolate)"));
            return bg_table;
        }
        const int64_t sr = (2 * gh - 1) * window;
        const int64_t sc = (2 * gw - 1) * window;
        Tensor<T> table = bg_table;
        if (table.shape[1] != sr || table.shape[2] != sc) {
            auto hw_first = permute(table, {1, 2, 0});
            table = permute(bilinear_resize(hw_first, sr, sc), {2, 0, 1});
        }
        std::vector<int64_t> idx(size_t(n * g));
        for (int64_t r = 0; r < nh; ++r)
            for (int64_t c = 0; c < nw; ++c)
                for (int64_t kr = 0; kr < gh; ++kr)
                    for (int64_t kc = 0; kc < gw; ++kc) {
                        const int64_t tr = r - kr * window + (gh - 1) * window;
                        const int64_t tc = c - kc * window + (gw - 1) * window;
                        idx[size_t((r * nw + c) * g + kr * gw + kc)] = tr * sc + tc;
                    }
        return reshape(index_select(reshape(table, {heads, sr * sc}), 1, idx), {heads, n, g});
    }

    // Intermediates the global stage reuses: the partition and the raw
    // per-window Q/V projections (computation sharing).
    struct LocalResult {
        Tensor<T> z_l;  // [N_h, N_w, C], residual included
        WindowPartition<T> part;
        Tensor<T> q, v;  // [num_windows, R^2, C]
    };

    LocalResult forward_local(const Tensor<T>& x, int64_t dilation, RunContext& ctx, double dp) const {
        const int64_t c = x.shape[2];
        const int64_t d = c / heads;
        const T inv_sqrt_d = T(1.0 / std::sqrt(double(d)));
        auto u = ln_local.forward(x);
        auto part = window_partition(u, window, dilation);
        const int64_t wins = part.num_windows(), s = window * window;
        Tensor<T> q, k, v;
        {
            OpLabel l("q_proj");
            q = wq.forward(part.windows);
        }
        {
            OpLabel l("k_proj");
            k = wk.forward(part.windows);
        }
        {
            OpLabel l("v_proj");
            v = wv.forward(part.windows);
        }
        auto to_heads = [&](const Tensor<T>& t) {
            return permute(reshape(t, {wins, s, heads, d}), {0, 2, 1, 3});
        };
        auto logits = scale(matmul(to_heads(q), to_heads(k), /*transpose_b=*/true), inv_sqrt_d);
        logits = add_suffix(logits, local_bias());
        if (part.padded) logits = add_key_mask(logits, part.key_mask());
        auto attn = softmax(logits, -1);
        auto ctx_l = reshape(permute(matmul(attn, to_heads(v)), {0, 2, 1, 3}), {wins, s, c});
        Tensor<T> local_out;
        {
            OpLabel l("o_proj");
            local_out = wo.forward(ctx_l);
        }
        auto local_res = window_assemble(part, &local_out);
        if (ctx.training && dp > 0) local_res = drop_path(local_res, dp, ctx.rand());
        return {add(x, local_res), std::move(part), std::move(q), std::move(v)};
    }

    // Global-attention queries without re-projecting Z_L: Q_L = Q_W +
    // DWConv(V_W) on the assembled spatial layout.
    Tensor<T> fixup_queries(const LocalResult& local) const {
        OpLabel l("q_fixup");
        auto qs = window_assemble(local.part, &local.q);
        auto vs = window_assemble(local.part, &local.v);
        return add(qs, fixup.forward(vs));
    }

    Tensor<T> forward_global(const LocalResult& local, RunContext& ctx, double dp) const {
        const Tensor<T>& z_l = local.z_l;
        const int64_t nh = z_l.shape[0], nw = z_l.shape[1], c = z_l.shape[2];
        const int64_t d = c / heads;
        const T inv_sqrt_d = T(1.0 / std::sqrt(double(d)));
        auto gin = ln_global.forward(z_l);
        auto z_g = embed.forward(gin);
        const int64_t gh = z_g.shape[0], gw = z_g.shape[1], g = gh * gw;
        Tensor<T> kg, vg;
        {
            OpLabel l("kg_proj");
            kg = wk.forward(reshape(z_g, {g, c}));
        }
        {
            OpLabel l("vg_proj");
            vg = wv.forward(reshape(z_g, {g, c}));
        }
        auto ql = fixup_queries(local);
        const int64_t n = nh * nw;
        auto qlh = permute(reshape(ql, {n, heads, d}), {1, 0, 2});
        auto kgh = permute(reshape(kg, {g, heads, d}), {1, 0, 2});
        auto vgh = permute(reshape(vg, {g, heads, d}), {1, 0, 2});
        auto glogits = scale(matmul(qlh, kgh, /*transpose_b=*/true), inv_sqrt_d);
        glogits = add(glogits, global_bias(nh, nw, gh, gw));
        auto gattn = softmax(glogits, -1);
        auto gctx = reshape(permute(matmul(gattn, vgh), {1, 0, 2}), {n, c});
        Tensor<T> gout;
        {
            OpLabel l("o_proj");
            gout = wo.forward(gctx);
        }
        auto global_res = reshape(gout, {nh, nw, c});
        if (ctx.training && dp > 0) global_res = drop_path(global_res, dp, ctx.rand());
        return add(z_l, global_res);
    }

    Tensor<T> forward(const Tensor<T>& x, int64_t dilation, RunContext& ctx, double dp) const {
        OpLabel scope("attn");
        return forward_global(forward_local(x, dilation, ctx, dp), ctx, dp);
    }
};

// MLP with an internal depth-wise conv and squeeze-excitation. stride 2
// performs the stage downsampling; the residual applies only when shape is
// preserved.
template <typename T>
struct Dwmlp {
    LayerNorm<T> ln;
    Conv2d<T> expand, dw, project;
    Linear<T> se_fc1, se_fc2;
    int64_t stride = 1;
    int64_t c_in = 0, c_out = 0;

    Dwmlp() = default;
    Dwmlp(ParamStore<T>& ps, const std::string& name, int64_t in, int64_t out, int64_t hidden, int64_t stride_)
        : ln(ps, name + ".ln", in),
          expand(ps, name + ".expand", 1, 1, in, hidden, 1, 0),
          dw(ps, name + ".dw", 3, 3, hidden, hidden, stride_, 1, /*groups=*/hidden),
          project(ps, name + ".project", 1, 1, hidden, out, 1, 0),
          se_fc1(ps, name + ".se_fc1", hidden, HlgConfig::se_width(out)),
          se_fc2(ps, name + ".se_fc2", HlgConfig::se_width(out), hidden),
          stride(stride_),
          c_in(in),
          c_out(out) {}

    Tensor<T> forward(const Tensor<T>& x, RunContext& ctx, double dp) const {
        OpLabel scope("mlp");
        auto u = ln.forward(x);
        auto e = gelu(expand.forward(u));
        auto dwd = gelu(dw.forward(e));
        auto pooled = reshape(global_avg_pool(dwd), {1, dwd.shape[2]});
        auto gate = sigmoid(se_fc2.forward(relu(se_fc1.forward(pooled))));
        auto gated = mul_suffix(dwd, reshape(gate, {dwd.shape[2]}));
        auto y = project.forward(gated);
        if (stride == 1 && c_in == c_out) {
            if (ctx.training && dp > 0) y = drop_path(y, dp, ctx.rand());
            return add(x, y);
        }
        return y;
    }
};

// DWMLP -> local attention -> global attention, pre-norm throughout.
template <typename T>
struct HlgSubLayer {
    Dwmlp<T> mlp;
    HlgAttention<T> attn;
    int64_t dilation = 1;
    double drop_prob = 0.0;

    HlgSubLayer() = default;
    HlgSubLayer(ParamStore<T>& ps, const std::string& name, int64_t c_in, int64_t c_out, int64_t hidden,
                int64_t stride, int64_t heads, int64_t r, int64_t dilation_, int64_t native_gh,
                int64_t native_gw, const HlgConfig& cfg, double drop_prob_)
        : mlp(ps, name + ".mlp", c_in, c_out, hidden, stride),
          attn(ps, name + ".attn", c_out, heads, r, native_gh, native_gw, cfg.window_embed, cfg.global_bias),
          dilation(dilation_),
          drop_prob(drop_prob_) {}

    Tensor<T> forward(const Tensor<T>& x, RunContext& ctx) const {
        auto y = mlp.forward(x, ctx, drop_prob);
        return attn.forward(y, dilation, ctx, drop_prob);
    }
};

// Plain + dilated sub-layer pair sharing one window size.
template <typename T>
struct HlgLayerPair {
    HlgSubLayer<T> plain, dilated;

    HlgLayerPair() = default;
    HlgLayerPair(ParamStore<T>& ps, const std::string& name, int64_t c_in, int64_t c_out, int64_t hidden,
                 int64_t stride, int64_t heads, int64_t r, int64_t dilation, int64_t native_gh,
                 int64_t native_gw, const HlgConfig& cfg, double dp_a, double dp_b)
        : plain(ps, name + ".a", c_in, c_out, hidden, stride, heads, r, 1, native_gh, native_gw, cfg, dp_a),
          dilated(ps, name + ".b", c_out, c_out, hidden, 1, heads, r, dilation, native_gh, native_gw, cfg,
                  dp_b) {}

    Tensor<T> forward(const Tensor<T>& x, RunContext& ctx) const {
        return dilated.forward(plain.forward(x, ctx), ctx);
    }
};

}  // namespace vistra
