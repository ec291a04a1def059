#pragma once

#include "vistra/tape.hpp"

namespace vistra {

namespace detail {

template <typename T, typename Fn>
void record_unary(Tensor<T>& out, const Tensor<T>& a, Fn&& grad_fn) {
    auto* tp = active_tape<T>();
    if (!tp || !tp->is_tracked(a)) return;
    int pa = tp->ensure_node(a);
    int node = tp->record(out.numel(), [pa, fn = std::forward<Fn>(grad_fn)](Tape<T>& t, const std::vector<T>& g) {
        if (pa < 0) return;
        std::vector<T> gx(g.size());
        fn(g, gx);
        t.accum(pa, gx.data(), int64_t(gx.size()));
    });
    tp->mark_output(out, node);
}

}  // namespace detail

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (!same_shape(a.shape, b.shape))
        fail_shape(op, ": shape mismatch ", shape_str(a.shape), " vs ", shape_str(b.shape));
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    check_same_shape(a, b, "add");
    Tensor<T> out = Tensor<T>::zeros(a.shape);
    const T* pa = a.ptr();
    const T* pb = b.ptr();
    T* po = out.ptr();
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
    check_finite(out, "add");
    if (auto* tp = active_tape<T>(); tp && (tp->is_tracked(a) || tp->is_tracked(b))) {
        int na = tp->ensure_node(a), nb = tp->ensure_node(b);
        int node = tp->record(n, [na, nb](Tape<T>& t, const std::vector<T>& g) {
            t.accum(na, g.data(), int64_t(g.size()));
            t.accum(nb, g.data(), int64_t(g.size()));
        });
        tp->mark_output(out, node);
    }
    return out;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    check_same_shape(a, b, "sub");
    Tensor<T> out = Tensor<T>::zeros(a.shape);
    const T* pa = a.ptr();
    const T* pb = b.ptr();
    T* po = out.ptr();
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) po[i] = pa[i] - pb[i];
    check_finite(out, "sub");
    if (auto* tp = active_tape<T>(); tp && (tp->is_tracked(a) || tp->is_tracked(b))) {
        int na = tp->ensure_node(a), nb = tp->ensure_node(b);
        int node = tp->record(n, [na, nb](Tape<T>& t, const std::vector<T>& g) {
            t.accum(na, g.data(), int64_t(g.size()));
            if (nb >= 0) {
                std::vector<T> gn(g.size());
                for (size_t i = 0; i < g.size(); ++i) gn[i] = -g[i];
                t.accum(nb, gn.data(), int64_t(gn.size()));
            }
        });
        tp->mark_output(out, node);
    }
    return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    check_same_shape(a, b, "mul");
    Tensor<T> out = Tensor<T>::zeros(a.shape);
    const T* pa = a.ptr();
    const T* pb = b.ptr();
    T* po = out.ptr();
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) po[i] = pa[i] * pb[i];
    check_finite(out, "mul");
    if (auto* tp = active_tape<T>(); tp && (tp->is_tracked(a) || tp->is_tracked(b))) {
        int na = tp->ensure_node(a), nb = tp->ensure_node(b);
        int node = tp->record(n, [na, nb, sa = a.data, sb = b.data](Tape<T>& t, const std::vector<T>& g) {
            if (na >= 0) {
                std::vector<T> gx(g.size());
                for (size_t i = 0; i < g.size(); ++i) gx[i] = g[i] * (*sb)[i];
                t.accum(na, gx.data(), int64_t(gx.size()));
            }
            if (nb >= 0) {
                std::vector<T> gx(g.size());
                for (size_t i = 0; i < g.size(); ++i) gx[i] = g[i] * (*sa)[i];
                t.accum(nb, gx.data(), int64_t(gx.size()));
            }
        });
        tp->mark_output(out, node);
    }
    return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T c) {
    Tensor<T> out = Tensor<T>::zeros(a.shape);
    const T* pa = a.ptr();
    T* po = out.ptr();
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) po[i] = pa[i] * c;
    check_finite(out, "scale");
    detail::record_unary(out, a, [c](const std::vector<T>& g, std::vector<T>& gx) {
        for (size_t i = 0; i < g.size(); ++i) gx[i] = g[i] * c;
    });
    return out;
}

// out[..., j] = x[..., j] + b[flattened suffix j]. The only implicit
// broadcast in the library: b must match a trailing slice of x's shape.
template <typename T>
Tensor<T> add_suffix(const Tensor<T>& x, const Tensor<T>& b) {
    if (b.rank() > x.rank()) fail_shape("add_suffix: bias rank exceeds input rank");
    const int off = x.rank() - b.rank();
    for (int i = 0; i < b.rank(); ++i)
        if (x.shape[size_t(i + off)] != b.shape[size_t(i)])
            fail_shape("add_suffix: suffix mismatch ", shape_str(x.shape), " vs ", shape_str(b.shape));
    const int64_t bn = b.numel();
    const int64_t rows = bn == 0 ? 0 : x.numel() / bn;
    Tensor<T> out = Tensor<T>::zeros(x.shape);
    const T* px = x.ptr();
    const T* pb = b.ptr();
    T* po = out.ptr();
    for (int64_t r = 0; r < rows; ++r)
        for (int64_t j = 0; j < bn; ++j) po[r * bn + j] = px[r * bn + j] + pb[j];
    check_finite(out, "add_suffix");
    if (auto* tp = active_tape<T>(); tp && (tp->is_tracked(x) || tp->is_tracked(b))) {
        int nx = tp->ensure_node(x), nb = tp->ensure_node(b);
        int node = tp->record(out.numel(), [nx, nb, rows, bn](Tape<T>& t, const std::vector<T>& g) {
            t.accum(nx, g.data(), int64_t(g.size()));
            if (nb >= 0) {
                std::vector<T> gb(size_t(bn), T(0));
                for (int64_t r = 0; r < rows; ++r)
                    for (int64_t j = 0; j < bn; ++j) gb[size_t(j)] += g[size_t(r * bn + j)];
                t.accum(nb, gb.data(), bn);
            }
        });
        tp->mark_output(out, node);
    }
    return out;
}

// out[..., j] = x[..., j] * m[flattened suffix j] (channel gating).
template <typename T>
Tensor<T> mul_suffix(const Tensor<T>& x, const Tensor<T>& m) {
    if (m.rank() > x.rank()) fail_shape("mul_suffix: gate rank exceeds input rank");
    const int off = x.rank() - m.rank();
    for (int i = 0; i < m.rank(); ++i)
        if (x.shape[size_t(i + off)] != m.shape[size_t(i)])
            fail_shape("mul_suffix: suffix mismatch ", shape_str(x.shape), " vs ", shape_str(m.shape));
    const int64_t mn = m.numel();
    const int64_t rows = mn == 0 ? 0 : x.numel() / mn;
    Tensor<T> out = Tensor<T>::zeros(x.shape);
    const T* px = x.ptr();
    const T* pm = m.ptr();
    T* po = out.ptr();
    for (int64_t r = 0; r < rows; ++r)
        for (int64_t j = 0; j < mn; ++j) po[r * mn + j] = px[r * mn + j] * pm[j];
    check_finite(out, "mul_suffix");
    if (auto* tp = active_tape<T>(); tp && (tp->is_tracked(x) || tp->is_tracked(m))) {
        int nx = tp->ensure_node(x), nm = tp->ensure_node(m);
        int node = tp->record(out.numel(),
                              [nx, nm, rows, mn, sx = x.data, sm = m.data](Tape<T>& t, const std::vector<T>& g) {
                                  if (nx >= 0) {
                                      std::vector<T> gx(g.size());
                                      for (int64_t r = 0; r < rows; ++r)
                                          for (int64_t j = 0; j < mn; ++j)
                                              gx[size_t(r * mn + j)] = g[size_t(r * mn + j)] * (*sm)[size_t(j)];
                                      t.accum(nx, gx.data(), int64_t(gx.size()));
                                  }
                                  if (nm >= 0) {
                                      std::vector<T> gm(size_t(mn), T(0));
                                      for (int64_t r = 0; r < rows; ++r)
                                          for (int64_t j = 0; j < mn; ++j)
                                              gm[size_t(j)] += g[size_t(r * mn + j)] * (*sx)[size_t(r * mn + j)];
                                      t.accum(nm, gm.data(), mn);
                                  }
                              });
        tp->mark_output(out, node);
    }
    return out;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
    Tensor<T> out = Tensor<T>::zeros(x.shape);
    const T* px = x.ptr();
    T* po = out.ptr();
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) po[i] = px[i] > T(0) ? px[i] : T(0);
    check_finite(out, "relu");
    detail::record_unary(out, x, [sx = x.data](const std::vector<T>& g, std::vector<T>& gx) {
        for (size_t i = 0; i < g.size(); ++i) gx[i] = (*sx)[i] > T(0) ? g[i] : T(0);
    });
    return out;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
    Tensor<T> out = Tensor<T>::zeros(x.shape);
    const T* px = x.ptr();
    T* po = out.ptr();
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) {
        const T v = px[i];
        po[i] = v >= T(0) ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v));
    }
    check_finite(out, "sigmoid");
    detail::record_unary(out, x, [so = out.data](const std::vector<T>& g, std::vector<T>& gx) {
        for (size_t i = 0; i < g.size(); ++i) {
            const T y = (*so)[i];
            gx[i] = g[i] * y * (T(1) - y);
        }
    });
    return out;
}

// Exact (erf) GELU.
template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
    Tensor<T> out = Tensor<T>::zeros(x.shape);
    const T* px = x.ptr();
    T* po = out.ptr();
    const int64_t n = out.numel();
    const T inv_sqrt2 = T(0.7071067811865475244);
    for (int64_t i = 0; i < n; ++i) po[i] = T(0.5) * px[i] * (T(1) + std::erf(px[i] * inv_sqrt2));
    check_finite(out, "gelu");
    detail::record_unary(out, x, [sx = x.data](const std::vector<T>& g, std::vector<T>& gx) {
        const T inv_sqrt2 = T(0.7071067811865475244);
        const T inv_sqrt2pi = T(0.3989422804014326779);
        for (size_t i = 0; i < g.size(); ++i) {
            const T v = (*sx)[i];
            const T cdf = T(0.5) * (T(1) + std::erf(v * inv_sqrt2));
            const T pdf = inv_sqrt2pi * std::exp(T(-0.5) * v * v);
            gx[i] = g[i] * (cdf + v * pdf);
        }
    });
    return out;
}

// Additive key mask for windowed attention. x has shape [W, Hh, I, J]
// (or [W, I, J]); mask has shape [W, J] and is a constant (no gradient).
template <typename T>
Tensor<T> add_key_mask(const Tensor<T>& x, const Tensor<T>& mask) {
    if (x.rank() < 2 || mask.rank() != 2)
        fail_shape("add_key_mask: expected x rank>=2, mask rank 2");
    const int64_t w = mask.shape[0];
    const int64_t j = mask.shape[1];
    if (x.shape[0] != w || x.shape[size_t(x.rank() - 1)] != j)
        fail_shape("add_key_mask: mask ", shape_str(mask.shape), " does not match x ", shape_str(x.shape));
    const int64_t inner = x.numel() / (w * j);
    Tensor<T> out = Tensor<T>::zeros(x.shape);
    const T* px = x.ptr();
    const T* pm = mask.ptr();
    T* po = out.ptr();
    for (int64_t wi = 0; wi < w; ++wi)
        for (int64_t r = 0; r < inner; ++r)
            for (int64_t c = 0; c < j; ++c) {
                const int64_t idx = (wi * inner + r) * j + c;
                po[idx] = px[idx] + pm[wi * j + c];
            }
    check_finite(out, "add_key_mask");
    detail::record_unary(out, x, [](const std::vector<T>& g, std::vector<T>& gx) { gx = g; });
    return out;
}

}  // namespace vistra
