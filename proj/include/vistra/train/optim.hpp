#pragma once

#include "vistra/nn/params.hpp"

namespace vistra {

// Polynomial decay: lr(t) = base * (1 - t/max_iters)^power.
struct PolySchedule {
    double base_lr = 0.01;
    double power = 0.9;
    int64_t max_iters = 1000;

    double lr(int64_t step) const {
        const double frac = 1.0 - double(step) / double(max_iters);
        return base_lr * std::pow(std::max(frac, 0.0), power);
    }
};

// Linear warmup to base, then half-cosine down to the floor.
struct CosineWarmupSchedule {
    double base_lr = 0.001;
    double min_lr = 0.0;
    int64_t warmup = 0;
    int64_t total = 1000;

    double lr(int64_t step) const {
        if (warmup > 0 && step < warmup) return base_lr * double(step) / double(warmup);
        if (step >= total) return min_lr;
        const double t = double(step - warmup) / double(std::max<int64_t>(1, total - warmup));
        return min_lr + 0.5 * (base_lr - min_lr) * (1.0 + std::cos(M_PI * t));
    }
};

// SGD with momentum: v <- mu*v + g; p <- p - lr*(v + wd*p).
template <typename T>
class SgdOptimizer {
public:
    PolySchedule schedule;
    double momentum = 0.9;
    double weight_decay = 0.0;

    void step(ParamStore<T>& params, int64_t t) {
        ensure(params);
        const T lr = T(schedule.lr(t));
        size_t vi = 0;
        for (auto& e : params.entries()) {
            if (!e.learnable) continue;
            auto& vel = velocity_[vi++];
            T* p = e.tensor.ptr();
            const T* g = e.tensor.grad->data();
            for (int64_t i = 0; i < e.tensor.numel(); ++i) {
                vel[size_t(i)] = T(momentum) * vel[size_t(i)] + g[i];
                p[i] -= lr * (vel[size_t(i)] + T(weight_decay) * p[i]);
            }
        }
    }

    std::vector<std::vector<T>>& state() { return velocity_; }

    void ensure(ParamStore<T>& params) {
        if (!velocity_.empty()) return;
        for (auto& e : params.entries())
            if (e.learnable) velocity_.emplace_back(size_t(e.tensor.numel()), T(0));
    }

private:
    std::vector<std::vector<T>> velocity_;
};

// AdamW with decoupled weight decay:
//   m <- b1*m + (1-b1)*g;  v <- b2*v + (1-b2)*g^2
//   p <- p - lr * (mhat / (sqrt(vhat) + eps) + wd * p)
template <typename T>
class AdamWOptimizer {
public:
    CosineWarmupSchedule schedule;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    double weight_decay = 0.05;

    void step(ParamStore<T>& params, int64_t t) {
        ensure(params);
        const T lr = T(schedule.lr(t));
        ++step_count_;
        const double bc1 = 1.0 - std::pow(beta1, double(step_count_));
        const double bc2 = 1.0 - std::pow(beta2, double(step_count_));
        size_t vi = 0;
        for (auto& e : params.entries()) {
            if (!e.learnable) continue;
            auto& m = m_[vi];
            auto& v = v_[vi];
            ++vi;
            T* p = e.tensor.ptr();
            const T* g = e.tensor.grad->data();
            for (int64_t i = 0; i < e.tensor.numel(); ++i) {
                m[size_t(i)] = T(beta1) * m[size_t(i)] + T(1.0 - beta1) * g[i];
                v[size_t(i)] = T(beta2) * v[size_t(i)] + T(1.0 - beta2) * g[i] * g[i];
                const T mhat = m[size_t(i)] / T(bc1);
                const T vhat = v[size_t(i)] / T(bc2);
                p[i] -= lr * (mhat / (std::sqrt(vhat) + T(eps)) + T(weight_decay) * p[i]);
            }
        }
    }

    std::vector<std::vector<T>>& state_m() { return m_; }
    std::vector<std::vector<T>>& state_v() { return v_; }
    int64_t& step_count() { return step_count_; }

    void ensure(ParamStore<T>& params) {
        if (!m_.empty()) return;
        for (auto& e : params.entries())
            if (e.learnable) {
                m_.emplace_back(size_t(e.tensor.numel()), T(0));
                v_.emplace_back(size_t(e.tensor.numel()), T(0));
            }
    }

private:
    std::vector<std::vector<T>> m_, v_;
    int64_t step_count_ = 0;
};

}  // namespace vistra
