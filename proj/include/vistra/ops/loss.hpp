#pragma once

#include "vistra/tape.hpp"

namespace vistra {

// Mean softmax cross-entropy over rows of logits [N, K] against integer
// labels. Rows labeled `ignore_index` contribute nothing. Gradient per row is
// (softmax - onehot) / count_of_valid_rows.
template <typename T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, const std::vector<int32_t>& labels,
                                int32_t ignore_index = kIgnoreIndex) {
    if (logits.rank() != 2) fail_shape("cross_entropy: expected logits [N, K], got ", shape_str(logits.shape));
    const int64_t n = logits.shape[0];
    const int64_t k = logits.shape[1];
    if (int64_t(labels.size()) != n)
        fail_shape("cross_entropy: ", labels.size(), " labels for ", n, " rows");

    auto probs = std::make_shared<std::vector<T>>(size_t(n * k));
    const T* pl = logits.ptr();
    double total = 0;
    int64_t valid = 0;
    for (int64_t i = 0; i < n; ++i) {
        const int32_t y = labels[size_t(i)];
        if (y == ignore_index) continue;
        if (y < 0 || y >= k)
            throw Error(strcat_all("cross_entropy: label ", y, " out of range for ", k, " classes"));
        const T* row = pl + i * k;
        T mx = row[0];
        for (int64_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
        T sum = T(0);
        for (int64_t j = 0; j < k; ++j) {
            const T e = std::exp(row[j] - mx);
            (*probs)[size_t(i * k + j)] = e;
            sum += e;
        }
        const T inv = T(1) / sum;
        for (int64_t j = 0; j < k; ++j) (*probs)[size_t(i * k + j)] *= inv;
        total += double(mx) + std::log(double(sum)) - double(row[y]);
        ++valid;
    }
    if (valid == 0) throw Error("cross_entropy: all rows ignored");
    Tensor<T> out = Tensor<T>::scalar(T(total / double(valid)));
    check_finite(out, "cross_entropy");

    if (auto* tp = active_tape<T>(); tp && tp->is_tracked(logits)) {
        int nx = tp->ensure_node(logits);
        int node = tp->record(1, [nx, probs, labels, ignore_index, n, k, valid](Tape<T>& t,
                                                                                const std::vector<T>& g) {
            std::vector<T> gx(size_t(n * k), T(0));
            const T s = g[0] / T(valid);
            for (int64_t i = 0; i < n; ++i) {
                const int32_t y = labels[size_t(i)];
                if (y == ignore_index) continue;
                for (int64_t j = 0; j < k; ++j) {
                    T v = (*probs)[size_t(i * k + j)];
                    if (j == y) v -= T(1);
                    gx[size_t(i * k + j)] = v * s;
                }
            }
            t.accum(nx, gx.data(), int64_t(gx.size()));
        });
        tp->mark_output(out, node);
    }
    return out;
}

}  // namespace vistra
