#pragma once

#include <map>

#include "vistra/tensor.hpp"

namespace vistra {

enum class Init { Zeros, Ones, TruncNormal };

// Ordered registry of named tensors. Learnable entries carry gradients and
// feed the optimizer; buffers (e.g. batch-norm running stats) are persisted
// in checkpoints but never counted as parameters.
template <typename T>
class ParamStore {
public:
    struct Entry {
        std::string name;
        Tensor<T> tensor;
        bool learnable = true;
    };

    // zero_init skips random initialization (audits and shape checks on
    // full-size models, where drawing hundreds of millions of normals is
    // pointless).
    explicit ParamStore(uint64_t init_seed = 42, bool zero_init = false)
        : rng_(init_seed), zero_init_(zero_init) {}

    Tensor<T> param(const std::string& name, Shape shape, Init init = Init::TruncNormal, double sigma = 0.02) {
        Tensor<T> t = make(std::move(shape), init, sigma);
        t.set_requires_grad(true);
        insert(name, t, true);
        return t;
    }

    Tensor<T> buffer(const std::string& name, Shape shape, Init init = Init::Zeros) {
        Tensor<T> t = make(std::move(shape), init, 0.0);
        insert(name, t, false);
        return t;
    }

    bool has(const std::string& name) const { return index_.count(name) != 0; }

    Entry& at(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) throw Error("no parameter named '" + name + "'");
        return entries_[it->second];
    }

    const std::vector<Entry>& entries() const { return entries_; }
    std::vector<Entry>& entries() { return entries_; }

    int64_t learnable_count() const {
        int64_t n = 0;
        for (const auto& e : entries_)
            if (e.learnable) n += e.tensor.numel();
        return n;
    }

    void zero_grads() {
        for (auto& e : entries_)
            if (e.learnable) e.tensor.zero_grad();
    }

    // Init draws come from a store-local stream so model construction is
    // reproducible regardless of what else consumed the run RNG.
    Rng& init_rng() { return rng_; }

private:
    Tensor<T> make(Shape shape, Init init, double sigma) {
        Tensor<T> t = Tensor<T>::zeros(std::move(shape));
        switch (init) {
            case Init::Zeros:
                break;
            case Init::Ones:
                std::fill(t.data->begin(), t.data->end(), T(1));
                break;
            case Init::TruncNormal:
                if (!zero_init_)
                    for (auto& v : *t.data) v = T(rng_.trunc_normal(sigma));
                break;
        }
        return t;
    }

    void insert(const std::string& name, const Tensor<T>& t, bool learnable) {
        if (index_.count(name)) throw Error("duplicate parameter name '" + name + "'");
        index_[name] = entries_.size();
        entries_.push_back({name, t, learnable});
    }

    std::vector<Entry> entries_;
    std::map<std::string, size_t> index_;
    Rng rng_;
    bool zero_init_ = false;
};

}  // namespace vistra
