#pragma once

#include "vistra/tape.hpp"

namespace vistra {

// Zero-copy view with a new shape; gradient passes through unchanged.
template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape new_shape) {
    if (numel(new_shape) != x.numel())
        fail_shape("reshape: cannot view ", shape_str(x.shape), " as ", shape_str(new_shape));
    Tensor<T> out;
    out.shape = std::move(new_shape);
    out.data = x.data;
    if (auto* tp = active_tape<T>(); tp && tp->is_tracked(x)) {
        int nx = tp->ensure_node(x);
        int node = tp->record(out.numel(), [nx](Tape<T>& t, const std::vector<T>& g) {
            t.accum(nx, g.data(), int64_t(g.size()));
        });
        tp->mark_output(out, node);
    }
    return out;
}

namespace detail {

template <typename T>
void permute_copy(const T* src, T* dst, const Shape& in_shape, const std::vector<int>& perm) {
    const int r = int(in_shape.size());
    auto in_strides = strides_of(in_shape);
    Shape out_shape(static_cast<size_t>(r));
    for (int i = 0; i < r; ++i) out_shape[size_t(i)] = in_shape[size_t(perm[size_t(i)])];
    auto out_strides = strides_of(out_shape);
    std::vector<int64_t> src_stride_for_out(static_cast<size_t>(r));
    for (int i = 0; i < r; ++i) src_stride_for_out[size_t(i)] = in_strides[size_t(perm[size_t(i)])];
    const int64_t n = numel(in_shape);
    std::vector<int64_t> idx(size_t(r), 0);
    int64_t src_off = 0;
    for (int64_t o = 0; o < n; ++o) {
        dst[o] = src[src_off];
        for (int d = r - 1; d >= 0; --d) {
            idx[size_t(d)]++;
            src_off += src_stride_for_out[size_t(d)];
            if (idx[size_t(d)] < out_shape[size_t(d)]) break;
            src_off -= src_stride_for_out[size_t(d)] * out_shape[size_t(d)];
            idx[size_t(d)] = 0;
        }
    }
}

}  // namespace detail

template <typename T>
Tensor<T> permute(const Tensor<T>& x, std::vector<int> perm) {
    const int r = x.rank();
    if (int(perm.size()) != r) fail_shape("permute: perm size ", perm.size(), " vs rank ", r);
    std::vector<bool> seen(size_t(r), false);
    for (int p : perm) {
        if (p < 0 || p >= r || seen[size_t(p)]) fail_shape("permute: invalid permutation");
        seen[size_t(p)] = true;
    }
    Shape out_shape(static_cast<size_t>(r));
    for (int i = 0; i < r; ++i) out_shape[size_t(i)] = x.shape[size_t(perm[size_t(i)])];
    Tensor<T> out = Tensor<T>::zeros(out_shape);
    detail::permute_copy(x.ptr(), out.ptr(), x.shape, perm);
    if (auto* tp = active_tape<T>(); tp && tp->is_tracked(x)) {
        int nx = tp->ensure_node(x);
        std::vector<int> inv(static_cast<size_t>(r));
        for (int i = 0; i < r; ++i) inv[size_t(perm[size_t(i)])] = i;
        int node = tp->record(out.numel(), [nx, inv, out_shape](Tape<T>& t, const std::vector<T>& g) {
            std::vector<T> gx(g.size());
            detail::permute_copy(g.data(), gx.data(), out_shape, inv);
            t.accum(nx, gx.data(), int64_t(gx.size()));
        });
        tp->mark_output(out, node);
    }
    return out;
}

template <typename T>
Tensor<T> transpose_last2(const Tensor<T>& x) {
    std::vector<int> perm(size_t(x.rank()));
    for (int i = 0; i < x.rank(); ++i) perm[size_t(i)] = i;
    std::swap(perm[size_t(x.rank() - 2)], perm[size_t(x.rank() - 1)]);
    return permute(x, perm);
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis) {
    if (parts.empty()) fail_shape("concat: no inputs");
    const int r = parts[0].rank();
    if (axis < 0) axis += r;
    Shape out_shape = parts[0].shape;
    int64_t axis_total = 0;
    for (const auto& p : parts) {
        if (p.rank() != r) fail_shape("concat: rank mismatch");
        for (int i = 0; i < r; ++i)
            if (i != axis && p.shape[size_t(i)] != out_shape[size_t(i)])
                fail_shape("concat: shape mismatch ", shape_str(p.shape), " vs ", shape_str(out_shape),
                           " on non-concat axis ", i);
        axis_total += p.shape[size_t(axis)];
    }
    out_shape[size_t(axis)] = axis_total;
    Tensor<T> out = Tensor<T>::zeros(out_shape);

    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= out_shape[size_t(i)];
    for (int i = axis + 1; i < r; ++i) inner *= out_shape[size_t(i)];

    T* po = out.ptr();
    int64_t axis_off = 0;
    std::vector<int64_t> offsets(parts.size());
    for (size_t pi = 0; pi < parts.size(); ++pi) {
        offsets[pi] = axis_off;
        const int64_t ext = parts[pi].shape[size_t(axis)];
        const T* ps = parts[pi].ptr();
        for (int64_t o = 0; o < outer; ++o)
            std::memcpy(po + (o * axis_total + axis_off) * inner, ps + o * ext * inner,
                        size_t(ext * inner) * sizeof(T));
        axis_off += ext;
    }
    if (auto* tp = active_tape<T>()) {
        bool any = false;
        for (const auto& p : parts) any = any || tp->is_tracked(p);
        if (any) {
            std::vector<int> ids;
            std::vector<int64_t> exts;
            for (const auto& p : parts) {
                ids.push_back(tp->ensure_node(p));
                exts.push_back(p.shape[size_t(axis)]);
            }
            int node = tp->record(out.numel(),
                                  [ids, exts, offsets, outer, inner, axis_total](Tape<T>& t, const std::vector<T>& g) {
                                      for (size_t pi = 0; pi < ids.size(); ++pi) {
                                          if (ids[pi] < 0) continue;
                                          std::vector<T> gp(size_t(outer * exts[pi] * inner));
                                          for (int64_t o = 0; o < outer; ++o)
                                              std::memcpy(gp.data() + o * exts[pi] * inner,
                                                          g.data() + (o * axis_total + offsets[pi]) * inner,
                                                          size_t(exts[pi] * inner) * sizeof(T));
                                          t.accum(ids[pi], gp.data(), int64_t(gp.size()));
                                      }
                                  });
            tp->mark_output(out, node);
        }
    }
    return out;
}

template <typename T>
Tensor<T> slice(const Tensor<T>& x, int axis, int64_t start, int64_t len) {
    const int r = x.rank();
    if (axis < 0) axis += r;
    if (axis < 0 || axis >= r) fail_shape("slice: bad axis");
    if (start < 0 || len < 0 || start + len > x.shape[size_t(axis)])
        fail_shape("slice: range [", start, ", ", start + len, ") out of extent ", x.shape[size_t(axis)]);
    Shape out_shape = x.shape;
    out_shape[size_t(axis)] = len;
    Tensor<T> out = Tensor<T>::zeros(out_shape);
    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= x.shape[size_t(i)];
    for (int i = axis + 1; i < r; ++i) inner *= x.shape[size_t(i)];
    const int64_t ext = x.shape[size_t(axis)];
    const T* px = x.ptr();
    T* po = out.ptr();
    for (int64_t o = 0; o < outer; ++o)
        std::memcpy(po + o * len * inner, px + (o * ext + start) * inner, size_t(len * inner) * sizeof(T));
    if (auto* tp = active_tape<T>(); tp && tp->is_tracked(x)) {
        int nx = tp->ensure_node(x);
        int node = tp->record(out.numel(),
                              [nx, outer, inner, ext, start, len, n_in = x.numel()](Tape<T>& t, const std::vector<T>& g) {
                                  std::vector<T> gx(size_t(n_in), T(0));
                                  for (int64_t o = 0; o < outer; ++o)
                                      std::memcpy(gx.data() + (o * ext + start) * inner, g.data() + o * len * inner,
                                                  size_t(len * inner) * sizeof(T));
                                  t.accum(nx, gx.data(), int64_t(gx.size()));
                              });
        tp->mark_output(out, node);
    }
    return out;
}

// Gather along one axis: out[..., i, ...] = x[..., idx[i], ...].
// Indices may repeat; backward scatter-adds.
template <typename T>
Tensor<T> index_select(const Tensor<T>& x, int axis, const std::vector<int64_t>& idx) {
    const int r = x.rank();
    if (axis < 0) axis += r;
    if (axis < 0 || axis >= r) fail_shape("index_select: bad axis");
    const int64_t ext = x.shape[size_t(axis)];
    for (int64_t i : idx)
        if (i < 0 || i >= ext) fail_shape("index_select: index ", i, " out of extent ", ext);
    Shape out_shape = x.shape;
    out_shape[size_t(axis)] = int64_t(idx.size());
    Tensor<T> out = Tensor<T>::zeros(out_shape);
    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= x.shape[size_t(i)];
    for (int i = axis + 1; i < r; ++i) inner *= x.shape[size_t(i)];
    const T* px = x.ptr();
    T* po = out.ptr();
    const int64_t m = int64_t(idx.size());
    for (int64_t o = 0; o < outer; ++o)
        for (int64_t i = 0; i < m; ++i)
            std::memcpy(po + (o * m + i) * inner, px + (o * ext + idx[size_t(i)]) * inner,
                        size_t(inner) * sizeof(T));
    if (auto* tp = active_tape<T>(); tp && tp->is_tracked(x)) {
        int nx = tp->ensure_node(x);
        int node = tp->record(out.numel(),
                              [nx, outer, inner, ext, idx, m, n_in = x.numel()](Tape<T>& t, const std::vector<T>& g) {
                                  std::vector<T> gx(size_t(n_in), T(0));
                                  for (int64_t o = 0; o < outer; ++o)
                                      for (int64_t i = 0; i < m; ++i) {
                                          T* dst = gx.data() + (o * ext + idx[size_t(i)]) * inner;
                                          const T* src = g.data() + (o * m + i) * inner;
                                          for (int64_t c = 0; c < inner; ++c) dst[c] += src[c];
                                      }
                                  t.accum(nx, gx.data(), int64_t(gx.size()));
                              });
        tp->mark_output(out, node);
    }
    return out;
}

}  // namespace vistra
