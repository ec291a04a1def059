#pragma once

#include "vistra/tape.hpp"

namespace vistra {

// Window partition of an [N_h, N_w, C] map into [num_windows, R*R, C].
//
// One index rule covers plain and dilated windows. Per axis, positions are
// padded to a multiple of R*D and grouped in blocks of R*D; within a block,
// window row = block*D + (pos mod D) and in-window row = (pos mod R*D) div D.
// D = 1 reduces exactly to contiguous R x R tiles. Padded slots are zero and
// recorded so attention can mask them; assemble() inverts bit-exactly on the
// real region.
template <typename T>
struct WindowPartition {
    Tensor<T> windows;  // [num_windows, R*R, C]
    int64_t grid_h = 0, grid_w = 0;
    int64_t window = 0, dilation = 0;
    int64_t wins_h = 0, wins_w = 0;
    // slot -> source position (r * grid_w + c), or -1 for padding
    std::shared_ptr<std::vector<int64_t>> slot_to_pos;
    bool padded = false;

    int64_t num_windows() const { return wins_h * wins_w; }

    // additive key mask [num_windows, R*R]: 0 for real slots, -1e30 for pads
    Tensor<T> key_mask() const {
        const int64_t slots = window * window;
        Tensor<T> m = Tensor<T>::zeros({num_windows(), slots});
        for (int64_t i = 0; i < num_windows() * slots; ++i)
            if ((*slot_to_pos)[size_t(i)] < 0) (*m.data)[size_t(i)] = T(-1e30);
        return m;
    }
};

namespace detail {

struct AxisSlot {
    int64_t win, idx;
};

inline AxisSlot axis_slot(int64_t pos, int64_t r, int64_t d) {
    const int64_t block = pos / (r * d);
    const int64_t rem = pos % (r * d);
    return {block * d + rem % d, rem / d};
}

}  // namespace detail

template <typename T>
WindowPartition<T> window_partition(const Tensor<T>& x, int64_t r, int64_t d) {
    if (x.rank() != 3) fail_shape("window_partition: expected [N_h, N_w, C], got ", shape_str(x.shape));
    if (r < 1 || d < 1) fail_shape("window_partition: window ", r, " and dilation ", d, " must be >= 1");
    const int64_t nh = x.shape[0], nw = x.shape[1], c = x.shape[2];
    const int64_t span = r * d;
    const int64_t ph = ceil_div(nh, span) * span;
    const int64_t pw = ceil_div(nw, span) * span;

    WindowPartition<T> p;
    p.grid_h = nh;
    p.grid_w = nw;
    p.window = r;
    p.dilation = d;
    p.wins_h = (ph / span) * d;
    p.wins_w = (pw / span) * d;
    p.padded = (ph != nh) || (pw != nw);
    const int64_t slots = r * r;
    p.slot_to_pos = std::make_shared<std::vector<int64_t>>(size_t(p.num_windows() * slots), int64_t(-1));

    for (int64_t row = 0; row < ph; ++row) {
        const auto rs = detail::axis_slot(row, r, d);
        for (int64_t col = 0; col < pw; ++col) {
            const auto cs = detail::axis_slot(col, r, d);
            if (row >= nh || col >= nw) continue;
            const int64_t w = rs.win * p.wins_w + cs.win;
            const int64_t slot = rs.idx * r + cs.idx;
            (*p.slot_to_pos)[size_t(w * slots + slot)] = row * nw + col;
        }
    }

    p.windows = Tensor<T>::zeros({p.num_windows(), slots, c});
    const T* src = x.ptr();
    T* dst = p.windows.ptr();
    const auto& map = *p.slot_to_pos;
    for (int64_t i = 0; i < p.num_windows() * slots; ++i) {
        if (map[size_t(i)] < 0) continue;
        std::memcpy(dst + i * c, src + map[size_t(i)] * c, size_t(c) * sizeof(T));
    }

    if (auto* tp = active_tape<T>(); tp && tp->is_tracked(x)) {
        int nx = tp->ensure_node(x);
        auto map_ptr = p.slot_to_pos;
        const int64_t n_in = x.numel();
        const int64_t n_rows = p.num_windows() * slots;
        int node = tp->record(p.windows.numel(), [nx, map_ptr, c, n_in, n_rows](Tape<T>& t, const std::vector<T>& g) {
            std::vector<T> gx(size_t(n_in), T(0));
            for (int64_t i = 0; i < n_rows; ++i) {
                const int64_t pos = (*map_ptr)[size_t(i)];
                if (pos < 0) continue;
                for (int64_t ch = 0; ch < c; ++ch) gx[size_t(pos * c + ch)] += g[size_t(i * c + ch)];
            }
            t.accum(nx, gx.data(), n_in);
        });
        tp->mark_output(p.windows, node);
    }
    return p;
}

// Exact inverse of window_partition on the real region. `values` defaults to
// the partition's own tensor but may be any same-shaped tensor (e.g. the
// attention output over the same windows).
template <typename T>
Tensor<T> window_assemble(const WindowPartition<T>& p, const Tensor<T>* values = nullptr) {
    const Tensor<T>& v = values ? *values : p.windows;
    if (!p.slot_to_pos) throw Error("window_assemble: partition metadata missing");
    if (v.shape != p.windows.shape)
        fail_shape("window_assemble: values ", shape_str(v.shape), " vs partition ", shape_str(p.windows.shape));
    const int64_t c = v.shape[2];
    const int64_t slots = p.window * p.window;
    Tensor<T> out = Tensor<T>::zeros({p.grid_h, p.grid_w, c});
    const T* src = v.ptr();
    T* dst = out.ptr();
    const auto& map = *p.slot_to_pos;
    for (int64_t i = 0; i < p.num_windows() * slots; ++i) {
        if (map[size_t(i)] < 0) continue;
        std::memcpy(dst + map[size_t(i)] * c, src + i * c, size_t(c) * sizeof(T));
    }
    if (auto* tp = active_tape<T>(); tp && tp->is_tracked(v)) {
        int nv = tp->ensure_node(v);
        auto map_ptr = p.slot_to_pos;
        const int64_t n_rows = p.num_windows() * slots;
        const int64_t n_in = v.numel();
        int node = tp->record(out.numel(), [nv, map_ptr, c, n_rows, n_in](Tape<T>& t, const std::vector<T>& g) {
            std::vector<T> gv(size_t(n_in), T(0));
            for (int64_t i = 0; i < n_rows; ++i) {
                const int64_t pos = (*map_ptr)[size_t(i)];
                if (pos < 0) continue;
                for (int64_t ch = 0; ch < c; ++ch) gv[size_t(i * c + ch)] = g[size_t(pos * c + ch)];
            }
            t.accum(nv, gv.data(), n_in);
        });
        tp->mark_output(out, node);
    }
    return out;
}

}  // namespace vistra
