#pragma once

#include "vistra/tape.hpp"

namespace vistra {

// Numerically stable softmax along `axis` (max-subtracted). Slices whose
// entries are all hard-masked (<= -1e29) come out uniform; they only occur
// for fully padded windows whose outputs are cropped away.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int axis = -1) {
    const int r = x.rank();
    if (axis < 0) axis += r;
    if (axis < 0 || axis >= r) fail_shape("softmax: bad axis ", axis, " for ", shape_str(x.shape));
    const int64_t ext = x.shape[size_t(axis)];
    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= x.shape[size_t(i)];
    for (int i = axis + 1; i < r; ++i) inner *= x.shape[size_t(i)];

    Tensor<T> out = Tensor<T>::zeros(x.shape);
    const T* px = x.ptr();
    T* po = out.ptr();
    const T masked_floor = T(-1e29);
    for (int64_t o = 0; o < outer; ++o) {
        for (int64_t in = 0; in < inner; ++in) {
            const int64_t base = o * ext * inner + in;
            T mx = px[base];
            for (int64_t j = 1; j < ext; ++j) mx = std::max(mx, px[base + j * inner]);
            if (mx <= masked_floor) {
                const T u = T(1) / T(ext);
                for (int64_t j = 0; j < ext; ++j) po[base + j * inner] = u;
                continue;
            }
            T sum = T(0);
            for (int64_t j = 0; j < ext; ++j) {
                const T e = std::exp(px[base + j * inner] - mx);
                po[base + j * inner] = e;
                sum += e;
            }
            const T inv = T(1) / sum;
            for (int64_t j = 0; j < ext; ++j) po[base + j * inner] *= inv;
        }
    }
    check_finite(out, "softmax");

    if (auto* tp = active_tape<T>(); tp && tp->is_tracked(x)) {
        int nx = tp->ensure_node(x);
        int node = tp->record(out.numel(),
                              [nx, so = out.data, outer, inner, ext](Tape<T>& t, const std::vector<T>& g) {
                                  std::vector<T> gx(g.size());
                                  const T* py = so->data();
                                  for (int64_t o = 0; o < outer; ++o)
                                      for (int64_t in = 0; in < inner; ++in) {
                                          const int64_t base = o * ext * inner + in;
                                          T dot = T(0);
                                          for (int64_t j = 0; j < ext; ++j)
                                              dot += g[size_t(base + j * inner)] * py[base + j * inner];
                                          for (int64_t j = 0; j < ext; ++j) {
                                              const int64_t at = base + j * inner;
                                              gx[size_t(at)] = py[at] * (g[size_t(at)] - dot);
                                          }
                                      }
                                  t.accum(nx, gx.data(), int64_t(gx.size()));
                              });
        tp->mark_output(out, node);
    }
    return out;
}

template <typename T>
Tensor<T> sum_all(const Tensor<T>& x) {
    T acc = T(0);
    const T* px = x.ptr();
    const int64_t n = x.numel();
    for (int64_t i = 0; i < n; ++i) acc += px[i];
    Tensor<T> out = Tensor<T>::scalar(acc);
    check_finite(out, "sum");
    if (auto* tp = active_tape<T>(); tp && tp->is_tracked(x)) {
        int nx = tp->ensure_node(x);
        int node = tp->record(1, [nx, n](Tape<T>& t, const std::vector<T>& g) {
            std::vector<T> gx(size_t(n), g[0]);
            t.accum(nx, gx.data(), n);
        });
        tp->mark_output(out, node);
    }
    return out;
}

template <typename T>
Tensor<T> mean_all(const Tensor<T>& x) {
    const int64_t n = x.numel();
    T acc = T(0);
    const T* px = x.ptr();
    for (int64_t i = 0; i < n; ++i) acc += px[i];
    Tensor<T> out = Tensor<T>::scalar(acc / T(n));
    check_finite(out, "mean");
    if (auto* tp = active_tape<T>(); tp && tp->is_tracked(x)) {
        int nx = tp->ensure_node(x);
        int node = tp->record(1, [nx, n](Tape<T>& t, const std::vector<T>& g) {
            std::vector<T> gx(size_t(n), g[0] / T(n));
            t.accum(nx, gx.data(), n);
        });
        tp->mark_output(out, node);
    }
    return out;
}

}  // namespace vistra
