#pragma once

#include "vistra/tape.hpp"

namespace vistra {

// Layer normalization over the last axis with affine transform.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps = T(1e-5)) {
    if (x.rank() < 1) fail_shape("layer_norm: rank 0 input");
    const int64_t c = x.shape[size_t(x.rank() - 1)];
    if (gamma.numel() != c || beta.numel() != c)
        fail_shape("layer_norm: affine params must have ", c, " entries, got ", gamma.numel(), "/", beta.numel());
    const int64_t rows = x.numel() / c;

    Tensor<T> out = Tensor<T>::zeros(x.shape);
    auto xhat = std::make_shared<std::vector<T>>(size_t(x.numel()));
    auto inv_std = std::make_shared<std::vector<T>>(size_t(rows));
    const T* px = x.ptr();
    const T* pg = gamma.ptr();
    const T* pb = beta.ptr();
    T* po = out.ptr();
    for (int64_t r = 0; r < rows; ++r) {
        const T* row = px + r * c;
        T mu = T(0);
        for (int64_t j = 0; j < c; ++j) mu += row[j];
        mu /= T(c);
        T var = T(0);
        for (int64_t j = 0; j < c; ++j) {
            const T d = row[j] - mu;
            var += d * d;
        }
        var /= T(c);
        const T is = T(1) / std::sqrt(var + eps);
        (*inv_std)[size_t(r)] = is;
        for (int64_t j = 0; j < c; ++j) {
            const T xh = (row[j] - mu) * is;
            (*xhat)[size_t(r * c + j)] = xh;
            po[r * c + j] = xh * pg[j] + pb[j];
        }
    }
    check_finite(out, "layer_norm");

    if (auto* tp = active_tape<T>(); tp && (tp->is_tracked(x) || tp->is_tracked(gamma) || tp->is_tracked(beta))) {
        int nx = tp->ensure_node(x), ng = tp->ensure_node(gamma), nb = tp->ensure_node(beta);
        int node = tp->record(
            out.numel(), [nx, ng, nb, xhat, inv_std, sg = gamma.data, rows, c](Tape<T>& t, const std::vector<T>& g) {
                if (ng >= 0 || nb >= 0) {
                    std::vector<T> dgamma(size_t(c), T(0)), dbeta(size_t(c), T(0));
                    for (int64_t r = 0; r < rows; ++r)
                        for (int64_t j = 0; j < c; ++j) {
                            dgamma[size_t(j)] += g[size_t(r * c + j)] * (*xhat)[size_t(r * c + j)];
                            dbeta[size_t(j)] += g[size_t(r * c + j)];
                        }
                    t.accum(ng, dgamma.data(), c);
                    t.accum(nb, dbeta.data(), c);
                }
                if (nx >= 0) {
                    std::vector<T> gx(g.size());
                    for (int64_t r = 0; r < rows; ++r) {
                        T sum_dxhat = T(0), sum_dxhat_xhat = T(0);
                        for (int64_t j = 0; j < c; ++j) {
                            const T dxh = g[size_t(r * c + j)] * (*sg)[size_t(j)];
                            sum_dxhat += dxh;
                            sum_dxhat_xhat += dxh * (*xhat)[size_t(r * c + j)];
                        }
                        const T inv_c = T(1) / T(c);
                        for (int64_t j = 0; j < c; ++j) {
                            const T dxh = g[size_t(r * c + j)] * (*sg)[size_t(j)];
                            gx[size_t(r * c + j)] =
                                (*inv_std)[size_t(r)] *
                                (dxh - sum_dxhat * inv_c - (*xhat)[size_t(r * c + j)] * sum_dxhat_xhat * inv_c);
                        }
                    }
                    t.accum(nx, gx.data(), int64_t(gx.size()));
                }
            });
        tp->mark_output(out, node);
    }
    return out;
}

// Single-process batch norm over the spatial positions of an [H, W, C] map.
// Running statistics live outside the tape (plain buffers updated in train
// mode); eval mode normalizes with them as constants.
template <typename T>
Tensor<T> batch_norm_2d(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                        Tensor<T>& running_mean, Tensor<T>& running_var, bool training,
                        T momentum = T(0.1), T eps = T(1e-5)) {
    if (x.rank() != 3) fail_shape("batch_norm_2d: expected [H, W, C], got ", shape_str(x.shape));
    const int64_t c = x.shape[2];
    const int64_t rows = x.numel() / c;
    if (gamma.numel() != c || beta.numel() != c || running_mean.numel() != c || running_var.numel() != c)
        fail_shape("batch_norm_2d: channel mismatch");

    Tensor<T> out = Tensor<T>::zeros(x.shape);
    const T* px = x.ptr();
    const T* pg = gamma.ptr();
    const T* pb = beta.ptr();
    T* po = out.ptr();

    std::vector<T> mean(size_t(c), T(0)), var(size_t(c), T(0));
    if (training) {
        for (int64_t r = 0; r < rows; ++r)
            for (int64_t j = 0; j < c; ++j) mean[size_t(j)] += px[r * c + j];
        for (int64_t j = 0; j < c; ++j) mean[size_t(j)] /= T(rows);
        for (int64_t r = 0; r < rows; ++r)
            for (int64_t j = 0; j < c; ++j) {
                const T d = px[r * c + j] - mean[size_t(j)];
                var[size_t(j)] += d * d;
            }
        for (int64_t j = 0; j < c; ++j) var[size_t(j)] /= T(rows);
        // unbiased variance for the running estimate, biased for normalization
        T* rm = running_mean.ptr();
        T* rv = running_var.ptr();
        const T unbias = rows > 1 ? T(rows) / T(rows - 1) : T(1);
        for (int64_t j = 0; j < c; ++j) {
            rm[j] = (T(1) - momentum) * rm[j] + momentum * mean[size_t(j)];
            rv[j] = (T(1) - momentum) * rv[j] + momentum * var[size_t(j)] * unbias;
        }
    } else {
        const T* rm = running_mean.ptr();
        const T* rv = running_var.ptr();
        for (int64_t j = 0; j < c; ++j) {
            mean[size_t(j)] = rm[j];
            var[size_t(j)] = rv[j];
        }
    }

    auto xhat = std::make_shared<std::vector<T>>(size_t(x.numel()));
    auto inv_std = std::make_shared<std::vector<T>>(size_t(c));
    for (int64_t j = 0; j < c; ++j) (*inv_std)[size_t(j)] = T(1) / std::sqrt(var[size_t(j)] + eps);
    for (int64_t r = 0; r < rows; ++r)
        for (int64_t j = 0; j < c; ++j) {
            const T xh = (px[r * c + j] - mean[size_t(j)]) * (*inv_std)[size_t(j)];
            (*xhat)[size_t(r * c + j)] = xh;
            po[r * c + j] = xh * pg[j] + pb[j];
        }
    check_finite(out, "batch_norm_2d");

    if (auto* tp = active_tape<T>(); tp && (tp->is_tracked(x) || tp->is_tracked(gamma) || tp->is_tracked(beta))) {
        int nx = tp->ensure_node(x), ng = tp->ensure_node(gamma), nb = tp->ensure_node(beta);
        int node = tp->record(
            out.numel(), [nx, ng, nb, xhat, inv_std, sg = gamma.data, rows, c, training](Tape<T>& t,
                                                                                         const std::vector<T>& g) {
                if (ng >= 0 || nb >= 0) {
                    std::vector<T> dgamma(size_t(c), T(0)), dbeta(size_t(c), T(0));
                    for (int64_t r = 0; r < rows; ++r)
                        for (int64_t j = 0; j < c; ++j) {
                            dgamma[size_t(j)] += g[size_t(r * c + j)] * (*xhat)[size_t(r * c + j)];
                            dbeta[size_t(j)] += g[size_t(r * c + j)];
                        }
                    t.accum(ng, dgamma.data(), c);
                    t.accum(nb, dbeta.data(), c);
                }
                if (nx >= 0) {
                    std::vector<T> gx(g.size());
                    if (training) {
                        std::vector<T> sum_dxh(size_t(c), T(0)), sum_dxh_xh(size_t(c), T(0));
                        for (int64_t r = 0; r < rows; ++r)
                            for (int64_t j = 0; j < c; ++j) {
                                const T dxh = g[size_t(r * c + j)] * (*sg)[size_t(j)];
                                sum_dxh[size_t(j)] += dxh;
                                sum_dxh_xh[size_t(j)] += dxh * (*xhat)[size_t(r * c + j)];
                            }
                        const T inv_n = T(1) / T(rows);
                        for (int64_t r = 0; r < rows; ++r)
                            for (int64_t j = 0; j < c; ++j) {
                                const T dxh = g[size_t(r * c + j)] * (*sg)[size_t(j)];
                                gx[size_t(r * c + j)] =
                                    (*inv_std)[size_t(j)] * (dxh - sum_dxh[size_t(j)] * inv_n -
                                                             (*xhat)[size_t(r * c + j)] * sum_dxh_xh[size_t(j)] * inv_n);
                            }
                    } else {
                        for (int64_t r = 0; r < rows; ++r)
                            for (int64_t j = 0; j < c; ++j)
                                gx[size_t(r * c + j)] =
                                    g[size_t(r * c + j)] * (*sg)[size_t(j)] * (*inv_std)[size_t(j)];
                    }
                    t.accum(nx, gx.data(), int64_t(gx.size()));
                }
            });
        tp->mark_output(out, node);
    }
    return out;
}

}  // namespace vistra
