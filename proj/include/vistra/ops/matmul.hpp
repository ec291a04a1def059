#pragma once

#include "vistra/ops/counter.hpp"
#include "vistra/tape.hpp"

namespace vistra {

namespace detail {

// C[m,n] (+)= A[m,k] * B[k,n]
template <typename T>
void gemm_nn(T* c, const T* a, const T* b, int64_t m, int64_t k, int64_t n, bool accumulate) {
    if (!accumulate)
        for (int64_t i = 0; i < m * n; ++i) c[i] = T(0);
    for (int64_t i = 0; i < m; ++i) {
        const T* arow = a + i * k;
        T* crow = c + i * n;
        for (int64_t p = 0; p < k; ++p) {
            const T av = arow[p];
            if (av == T(0)) continue;
            const T* brow = b + p * n;
            for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[m,n] (+)= A[m,k] * B[n,k]^T
template <typename T>
void gemm_nt(T* c, const T* a, const T* b, int64_t m, int64_t k, int64_t n, bool accumulate) {
    for (int64_t i = 0; i < m; ++i) {
        const T* arow = a + i * k;
        T* crow = c + i * n;
        for (int64_t j = 0; j < n; ++j) {
            const T* brow = b + j * k;
            T acc = T(0);
            for (int64_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            crow[j] = accumulate ? crow[j] + acc : acc;
        }
    }
}

// C[k,n] (+)= A[m,k]^T * B[m,n]
template <typename T>
void gemm_tn(T* c, const T* a, const T* b, int64_t m, int64_t k, int64_t n, bool accumulate) {
    if (!accumulate)
        for (int64_t i = 0; i < k * n; ++i) c[i] = T(0);
    for (int64_t i = 0; i < m; ++i) {
        const T* arow = a + i * k;
        const T* brow = b + i * n;
        for (int64_t p = 0; p < k; ++p) {
            const T av = arow[p];
            if (av == T(0)) continue;
            T* crow = c + p * n;
            for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

}  // namespace detail

// Batched matrix product. a is [batch..., m, k]; b is either [batch..., kb, nb]
// with matching batch dims or a plain rank-2 matrix shared across the batch.
// With transpose_b the last two dims of b are read as [n, k].
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b, bool transpose_b = false) {
    if (a.rank() < 2 || b.rank() < 2) fail_shape("matmul: need rank >= 2, got ", shape_str(a.shape), " x ", shape_str(b.shape));
    const int64_t m = a.shape[size_t(a.rank() - 2)];
    const int64_t k = a.shape[size_t(a.rank() - 1)];
    const int64_t bk = transpose_b ? b.shape[size_t(b.rank() - 1)] : b.shape[size_t(b.rank() - 2)];
    const int64_t n = transpose_b ? b.shape[size_t(b.rank() - 2)] : b.shape[size_t(b.rank() - 1)];
    if (k != bk)
        fail_shape("matmul: inner extents disagree: ", shape_str(a.shape), transpose_b ? " x T" : " x ",
                   shape_str(b.shape));
    const bool shared_b = b.rank() == 2 && a.rank() > 2;
    Shape batch_shape(a.shape.begin(), a.shape.end() - 2);
    if (!shared_b) {
        Shape b_batch(b.shape.begin(), b.shape.end() - 2);
        if (b_batch != batch_shape)
            fail_shape("matmul: batch dims disagree: ", shape_str(a.shape), " x ", shape_str(b.shape));
    }
    const int64_t batch = numel(batch_shape);

    Shape out_shape = batch_shape;
    out_shape.push_back(m);
    out_shape.push_back(n);
    Tensor<T> out = Tensor<T>::zeros(out_shape);

    const T* pa = a.ptr();
    const T* pb = b.ptr();
    T* po = out.ptr();
    for (int64_t bi = 0; bi < batch; ++bi) {
        const T* ba = pa + bi * m * k;
        const T* bb = shared_b ? pb : pb + bi * k * n;
        T* bo = po + bi * m * n;
        if (transpose_b)
            detail::gemm_nt(bo, ba, bb, m, k, n, false);
        else
            detail::gemm_nn(bo, ba, bb, m, k, n, false);
    }
    count_macs(uint64_t(batch) * uint64_t(m) * uint64_t(n) * uint64_t(k));
    check_finite(out, "matmul");

    if (auto* tp = active_tape<T>(); tp && (tp->is_tracked(a) || tp->is_tracked(b))) {
        int na = tp->ensure_node(a), nb = tp->ensure_node(b);
        int node = tp->record(
            out.numel(), [na, nb, sa = a.data, sb = b.data, m, k, n, batch, shared_b,
                          transpose_b](Tape<T>& t, const std::vector<T>& g) {
                const T* pg = g.data();
                if (na >= 0) {
                    // dA = dC * B^T   (or dC * B when b was transposed)
                    std::vector<T> ga(size_t(batch * m * k));
                    for (int64_t bi = 0; bi < batch; ++bi) {
                        const T* bg = pg + bi * m * n;
                        const T* bb = (shared_b ? sb->data() : sb->data() + bi * k * n);
                        T* go = ga.data() + bi * m * k;
                        if (transpose_b)
                            detail::gemm_nn(go, bg, bb, m, n, k, false);
                        else
                            detail::gemm_nt(go, bg, bb, m, n, k, false);
                    }
                    t.accum(na, ga.data(), int64_t(ga.size()));
                }
                if (nb >= 0) {
                    std::vector<T> gb(size_t((shared_b ? 1 : batch) * k * n), T(0));
                    for (int64_t bi = 0; bi < batch; ++bi) {
                        const T* bg = pg + bi * m * n;
                        const T* ba = sa->data() + bi * m * k;
                        T* go = shared_b ? gb.data() : gb.data() + bi * k * n;
                        if (transpose_b)
                            detail::gemm_tn(go, bg, ba, m, n, k, true);  // dB[n,k] += dC^T * A
                        else
                            detail::gemm_tn(go, ba, bg, m, k, n, true);  // dB[k,n] += A^T * dC
                    }
                    t.accum(nb, gb.data(), int64_t(gb.size()));
                }
            });
        tp->mark_output(out, node);
    }
    return out;
}

}  // namespace vistra
