#pragma once

#include <algorithm>
#include <initializer_list>
#include <memory>
#include <numeric>

#include "vistra/common.hpp"

namespace vistra {

using Shape = std::vector<int64_t>;

inline int64_t numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

inline bool same_shape(const Shape& a, const Shape& b) { return a == b; }

// Dense row-major tensor. Copies share the underlying buffer; ops never
// mutate their inputs, so this behaves like a value type in practice.
// `node` ties the tensor to the active autodiff tape while recording.
template <typename T>
struct Tensor {
    Shape shape;
    std::shared_ptr<std::vector<T>> data;
    int node = -1;
    uint64_t tape_id = 0;
    bool requires_grad = false;
    std::shared_ptr<std::vector<T>> grad;  // allocated lazily for leaves

    Tensor() = default;

    static Tensor zeros(Shape s) {
        Tensor t;
        t.shape = std::move(s);
        t.data = std::make_shared<std::vector<T>>(size_t(vistra::numel(t.shape)), T(0));
        return t;
    }

    static Tensor full(Shape s, T v) {
        Tensor t = zeros(std::move(s));
        std::fill(t.data->begin(), t.data->end(), v);
        return t;
    }

    static Tensor from(Shape s, std::vector<T> values) {
        if (vistra::numel(s) != int64_t(values.size()))
            fail_shape("tensor init: shape ", shape_str(s), " needs ", vistra::numel(s),
                       " values, got ", values.size());
        Tensor t;
        t.shape = std::move(s);
        t.data = std::make_shared<std::vector<T>>(std::move(values));
        return t;
    }

    static Tensor scalar(T v) { return from({}, {v}); }

    int64_t numel() const { return data ? int64_t(data->size()) : 0; }
    int64_t dim(int i) const {
        int r = int(shape.size());
        if (i < 0) i += r;
        return shape[size_t(i)];
    }
    int rank() const { return int(shape.size()); }

    T* ptr() { return data->data(); }
    const T* ptr() const { return data->data(); }
    T item() const {
        if (numel() != 1) fail_shape("item() on tensor of shape ", shape_str(shape));
        return (*data)[0];
    }

    // Detached deep copy (fresh buffer, no tape linkage).
    Tensor clone() const {
        Tensor t;
        t.shape = shape;
        t.data = std::make_shared<std::vector<T>>(*data);
        return t;
    }

    Tensor& set_requires_grad(bool v = true) {
        requires_grad = v;
        if (v && !grad) grad = std::make_shared<std::vector<T>>(size_t(numel()), T(0));
        return *this;
    }

    void zero_grad() {
        if (grad) std::fill(grad->begin(), grad->end(), T(0));
    }
};

template <typename T>
void check_finite(const Tensor<T>& t, const char* op) {
    const T* p = t.ptr();
    const int64_t n = t.numel();
    for (int64_t i = 0; i < n; ++i) {
        if (!std::isfinite(double(p[i])))
            throw NumericError(strcat_all("op '", op, "' produced non-finite value at index ", i));
    }
}

// Row-major strides for a shape.
inline std::vector<int64_t> strides_of(const Shape& s) {
    std::vector<int64_t> st(s.size(), 1);
    for (int i = int(s.size()) - 2; i >= 0; --i) st[size_t(i)] = st[size_t(i) + 1] * s[size_t(i) + 1];
    return st;
}

}  // namespace vistra
