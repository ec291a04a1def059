#pragma once

#include <functional>
#include <utility>

#include "vistra/tensor.hpp"

namespace vistra {

// Reverse-mode tape. Ops append nodes in execution order; backward() walks
// them once in reverse. A tensor references its node by index plus the id of
// the tape that created it, so stale handles from an earlier step degrade to
// constants instead of corrupting the walk.
template <typename T>
class Tape {
public:
    using BackFn = std::function<void(Tape&, const std::vector<T>&)>;

    Tape() : id_(next_id()) {}

    uint64_t id() const { return id_; }

    bool is_tracked(const Tensor<T>& t) const {
        return (t.node >= 0 && t.tape_id == id_) || t.requires_grad;
    }

    // Node index for an input tensor: existing node, a fresh leaf node for a
    // requires_grad tensor, or -1 for a constant.
    int ensure_node(const Tensor<T>& t) {
        if (t.node >= 0 && t.tape_id == id_) return t.node;
        if (!t.requires_grad) return -1;
        Node node;
        node.n = t.numel();
        node.leaf_sink = t.grad;
        nodes_.push_back(std::move(node));
        return int(nodes_.size()) - 1;
    }

    int record(int64_t out_numel, BackFn fn) {
        if (used_) throw Error("tape already consumed by backward(); reset before recording");
        Node node;
        node.n = out_numel;
        node.backward = std::move(fn);
        nodes_.push_back(std::move(node));
        return int(nodes_.size()) - 1;
    }

    void mark_output(Tensor<T>& t, int node) {
        t.node = node;
        t.tape_id = id_;
    }

    // Accumulate into a node gradient; no-op for constants (node < 0).
    void accum(int node, const T* src, int64_t n) {
        if (node < 0) return;
        auto& g = nodes_[size_t(node)].grad;
        if (g.empty()) g.assign(size_t(nodes_[size_t(node)].n), T(0));
        T* dst = g.data();
        for (int64_t i = 0; i < n; ++i) dst[i] += src[i];
    }

    std::vector<T>& grad_buffer(int node) {
        auto& g = nodes_[size_t(node)].grad;
        if (g.empty()) g.assign(size_t(nodes_[size_t(node)].n), T(0));
        return g;
    }

    void backward(const Tensor<T>& loss) {
        if (used_) throw Error("backward() called twice on the same tape");
        if (loss.numel() != 1) fail_shape("backward: loss must be scalar, got ", shape_str(loss.shape));
        if (loss.node < 0 || loss.tape_id != id_)
            throw Error("backward: loss is detached from this tape (no recorded graph)");
        used_ = true;
        accum(loss.node, std::vector<T>{T(1)}.data(), 1);
        for (int i = loss.node; i >= 0; --i) {
            Node& node = nodes_[size_t(i)];
            if (node.grad.empty()) continue;
            if (node.backward) {
                node.backward(*this, node.grad);
            } else if (node.leaf_sink) {
                T* dst = node.leaf_sink->data();
                for (size_t k = 0; k < node.grad.size(); ++k) dst[k] += node.grad[k];
            }
            node.grad.clear();
            node.grad.shrink_to_fit();
        }
    }

    void reset() {
        nodes_.clear();
        used_ = false;
        id_ = next_id();
    }

    size_t size() const { return nodes_.size(); }
    bool consumed() const { return used_; }

private:
    struct Node {
        int64_t n = 0;
        BackFn backward;             // empty for leaves
        std::vector<T> grad;
        std::shared_ptr<std::vector<T>> leaf_sink;
    };

    static uint64_t next_id() {
        static uint64_t counter = 0;
        return ++counter;
    }

    std::vector<Node> nodes_;
    uint64_t id_ = 0;
    bool used_ = false;
};

template <typename T>
inline thread_local Tape<T>* g_active_tape = nullptr;

template <typename T>
Tape<T>* active_tape() {
    return g_active_tape<T>;
}

// RAII activation of a tape for the current thread.
template <typename T>
class TapeScope {
public:
    explicit TapeScope(Tape<T>& tape) : prev_(g_active_tape<T>) { g_active_tape<T> = &tape; }
    ~TapeScope() { g_active_tape<T> = prev_; }
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape<T>* prev_;
};

// Temporarily disables recording (e.g. metric computation mid-training).
template <typename T>
class NoGradScope {
public:
    NoGradScope() : prev_(g_active_tape<T>) { g_active_tape<T> = nullptr; }
    ~NoGradScope() { g_active_tape<T> = prev_; }
    NoGradScope(const NoGradScope&) = delete;
    NoGradScope& operator=(const NoGradScope&) = delete;

private:
    Tape<T>* prev_;
};

}  // namespace vistra
