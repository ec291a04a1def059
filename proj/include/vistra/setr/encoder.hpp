#pragma once

#include "vistra/nn/layers.hpp"
#include "vistra/setr/config.hpp"

namespace vistra {

// The L x C embedding matrix flowing through the transformer, with its
// underlying token grid. The grid survives every layer unchanged.
template <typename T>
struct TokenSequence {
    Tensor<T> tokens;  // [L, C]
    int64_t grid_h = 0;
    int64_t grid_w = 0;

    int64_t length() const { return tokens.shape[0]; }
    int64_t channels() const { return tokens.shape[1]; }
};

// Learned absolute position table with the grid it was trained at.
template <typename T>
struct PositionEmbedding {
    Tensor<T> table;  // [L, C]
    int64_t grid_h = 0;
    int64_t grid_w = 0;
};

// Row-major extraction of non-overlapping P x P patches, flattened to
// [L, P*P*3] in (row, col, channel) order within each patch.
template <typename T>
Tensor<T> extract_patches(const Tensor<T>& image, int64_t patch) {
    if (image.rank() != 3 || image.shape[2] != 3)
        fail_shape("sequentialize: expected [H, W, 3] image, got ", shape_str(image.shape));
    const int64_t h = image.shape[0], w = image.shape[1];
    if (h % patch != 0 || w % patch != 0)
        fail_shape("sequentialize: image ", h, "x", w, " not divisible by patch size ", patch);
    const int64_t gh = h / patch, gw = w / patch;
    const int64_t flat = patch * patch * 3;
    Tensor<T> out = Tensor<T>::zeros({gh * gw, flat});
    const T* src = image.ptr();
    T* dst = out.ptr();
    for (int64_t py = 0; py < gh; ++py)
        for (int64_t px = 0; px < gw; ++px) {
            T* row = dst + (py * gw + px) * flat;
            for (int64_t iy = 0; iy < patch; ++iy)
                std::memcpy(row + iy * patch * 3, src + ((py * patch + iy) * w + px * patch) * 3,
                            size_t(patch * 3) * sizeof(T));
        }
    return out;
}

// 2D interpolation of the position table onto a new token grid; identity
// (bit-exact) when the grids already match.
template <typename T>
PositionEmbedding<T> interpolate_positions(const PositionEmbedding<T>& pe, int64_t new_h, int64_t new_w) {
    if (new_h < 1 || new_w < 1) fail_shape("interpolate_positions: grid must be positive");
    const int64_t c = pe.table.shape[1];
    auto spatial = reshape(pe.table, {pe.grid_h, pe.grid_w, c});
    auto resized = bilinear_resize(spatial, new_h, new_w);
    return {reshape(resized, {new_h * new_w, c}), new_h, new_w};
}

template <typename T>
TokenSequence<T> add_positions(const TokenSequence<T>& seq, const PositionEmbedding<T>& pe) {
    if (pe.grid_h != seq.grid_h || pe.grid_w != seq.grid_w)
        fail_shape("add_positions: grid (", seq.grid_h, ", ", seq.grid_w, ") vs position table (", pe.grid_h,
                   ", ", pe.grid_w, "); interpolate first");
    return {add(seq.tokens, pe.table), seq.grid_h, seq.grid_w};
}

// One pre-norm transformer layer: z += W_O . MSA(LN(z)); z += MLP(LN(z)).
template <typename T>
struct SetrLayer {
    LayerNorm<T> ln1, ln2;
    Linear<T> wq, wk, wv, wo;
    Linear<T> fc1, fc2;
    int64_t heads = 1;

    SetrLayer() = default;
    SetrLayer(ParamStore<T>& ps, const std::string& name, const SetrConfig& cfg)
        : ln1(ps, name + ".ln1", cfg.hidden),
          ln2(ps, name + ".ln2", cfg.hidden),
          wq(ps, name + ".wq", cfg.hidden, cfg.hidden),
          wk(ps, name + ".wk", cfg.hidden, cfg.hidden),
          wv(ps, name + ".wv", cfg.hidden, cfg.hidden),
          wo(ps, name + ".wo", cfg.hidden, cfg.hidden),
          fc1(ps, name + ".fc1", cfg.hidden, cfg.hidden * cfg.mlp_ratio),
          fc2(ps, name + ".fc2", cfg.hidden * cfg.mlp_ratio, cfg.hidden),
          heads(cfg.heads) {}

    Tensor<T> forward(const Tensor<T>& z, Tensor<T>* attn_out = nullptr) const {
        const int64_t l = z.shape[0], c = z.shape[1];
        if (c != wq.weight.shape[0]) fail_shape("transformer_layer: hidden ", c, " vs weights ", wq.weight.shape[0]);
        const int64_t d = c / heads;
        auto h = ln1.forward(z);
        auto split_heads = [&](const Tensor<T>& t) { return permute(reshape(t, {l, heads, d}), {1, 0, 2}); };
        Tensor<T> q, k, v;
        {
            OpLabel lq("q_proj");
            q = split_heads(wq.forward(h));
        }
        {
            OpLabel lk("k_proj");
            k = split_heads(wk.forward(h));
        }
        {
            OpLabel lv("v_proj");
            v = split_heads(wv.forward(h));
        }
        auto logits = scale(matmul(q, k, /*transpose_b=*/true), T(1.0 / std::sqrt(double(d))));
        auto attn = softmax(logits, -1);  // [m, L, L]
        if (attn_out) *attn_out = attn;
        auto ctxv = reshape(permute(matmul(attn, v), {1, 0, 2}), {l, c});
        auto z1 = add(z, wo.forward(ctxv));
        auto h2 = ln2.forward(z1);
        return add(z1, fc2.forward(gelu(fc1.forward(h2))));
    }
};

// Sequentialization + position embedding + L_e pre-norm layers. encode()
// returns every layer output (the MLA decoder and aux heads tap them).
template <typename T>
struct SetrEncoder {
    SetrConfig cfg;
    Linear<T> patch_proj;
    Tensor<T> pos_table;  // [L, C], zero-initialized
    std::vector<SetrLayer<T>> layers;
    LayerNorm<T> final_ln;

    SetrEncoder(ParamStore<T>& ps, const SetrConfig& config) : cfg(config) {
        patch_proj = Linear<T>(ps, "embed.proj", cfg.patch * cfg.patch * 3, cfg.hidden);
        pos_table = ps.param("embed.pos", {cfg.token_count(), cfg.hidden}, Init::Zeros);
        layers.reserve(size_t(cfg.layers));
        for (int64_t i = 0; i < cfg.layers; ++i)
            layers.emplace_back(ps, strcat_all("encoder.layer", i), cfg);
        final_ln = LayerNorm<T>(ps, "encoder.final_ln", cfg.hidden);
    }

    PositionEmbedding<T> positions() const {
        return {pos_table, cfg.tokens_per_side(), cfg.tokens_per_side()};
    }

    TokenSequence<T> sequentialize(const Tensor<T>& image) const {
        const int64_t gh = image.shape[0] / cfg.patch;
        const int64_t gw = image.shape[1] / cfg.patch;
        auto patches = extract_patches(image, cfg.patch);
        return {patch_proj.forward(patches), gh, gw};
    }

    TokenSequence<T> embed(const Tensor<T>& image) const {
        OpLabel scope("embed");
        auto seq = sequentialize(image);
        auto pe = positions();
        if (pe.grid_h != seq.grid_h || pe.grid_w != seq.grid_w)
            pe = interpolate_positions(pe, seq.grid_h, seq.grid_w);
        return add_positions(seq, pe);
    }

    // All layer outputs Z^1 .. Z^{L_e} (unnormalized); apply final_norm to
    // the last one before decoding.
    std::vector<TokenSequence<T>> encode(const Tensor<T>& image,
                                         std::vector<Tensor<T>>* attn_capture = nullptr) const {
        auto seq = embed(image);
        std::vector<TokenSequence<T>> outs;
        outs.reserve(layers.size());
        OpLabel scope("encoder");
        for (size_t i = 0; i < layers.size(); ++i) {
            OpLabel layer_scope(strcat_all("layer", i));
            Tensor<T> attn;
            seq.tokens = layers[i].forward(seq.tokens, attn_capture ? &attn : nullptr);
            if (attn_capture) attn_capture->push_back(attn);
            outs.push_back(seq);
        }
        return outs;
    }

    Tensor<T> final_norm(const Tensor<T>& z) const { return final_ln.forward(z); }
};

}  // namespace vistra
