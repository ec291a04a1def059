#pragma once

#include "vistra/common.hpp"

namespace vistra {

// Confusion-matrix segmentation metrics. Classes absent from both the
// prediction and the truth are excluded from the mean IoU.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(int32_t num_classes) : k_(num_classes), counts_(size_t(k_) * size_t(k_), 0) {}

    void add(const std::vector<int32_t>& pred, const std::vector<int32_t>& truth) {
        if (pred.size() != truth.size()) throw Error("confusion: size mismatch");
        for (size_t i = 0; i < pred.size(); ++i) {
            const int32_t t = truth[i];
            if (t == kIgnoreIndex) continue;
            const int32_t p = pred[i];
            if (t < 0 || t >= k_ || p < 0 || p >= k_)
                throw Error(strcat_all("confusion: label out of range: pred=", p, " truth=", t, " K=", k_));
            counts_[size_t(t) * size_t(k_) + size_t(p)]++;
        }
    }

    double pixel_accuracy() const {
        int64_t correct = 0, total = 0;
        for (int32_t t = 0; t < k_; ++t)
            for (int32_t p = 0; p < k_; ++p) {
                total += counts_[size_t(t) * size_t(k_) + size_t(p)];
                if (t == p) correct += counts_[size_t(t) * size_t(k_) + size_t(p)];
            }
        return total == 0 ? 0.0 : double(correct) / double(total);
    }

    // Per-class IoU (-1 marks classes absent from both sides) and their mean.
    std::pair<std::vector<double>, double> miou() const {
        std::vector<double> per(size_t(k_), -1.0);
        double sum = 0;
        int present = 0;
        for (int32_t c = 0; c < k_; ++c) {
            int64_t tp = counts_[size_t(c) * size_t(k_) + size_t(c)];
            int64_t fp = 0, fn = 0;
            for (int32_t o = 0; o < k_; ++o) {
                if (o == c) continue;
                fp += counts_[size_t(o) * size_t(k_) + size_t(c)];
                fn += counts_[size_t(c) * size_t(k_) + size_t(o)];
            }
            const int64_t denom = tp + fp + fn;
            if (denom == 0) continue;  // absent from both prediction and truth
            per[size_t(c)] = double(tp) / double(denom);
            sum += per[size_t(c)];
            ++present;
        }
        return {per, present == 0 ? 0.0 : sum / present};
    }

    const std::vector<int64_t>& counts() const { return counts_; }

private:
    int32_t k_;
    std::vector<int64_t> counts_;
};

// Per-pixel argmax over [H, W, K] logits.
template <typename T>
std::vector<int32_t> argmax_mask(const Tensor<T>& logits) {
    if (logits.rank() != 3) fail_shape("argmax_mask: expected [H, W, K]");
    const int64_t n = logits.shape[0] * logits.shape[1];
    const int64_t k = logits.shape[2];
    std::vector<int32_t> out(static_cast<size_t>(n));
    const T* p = logits.ptr();
    for (int64_t i = 0; i < n; ++i) {
        int32_t best = 0;
        T bv = p[i * k];
        for (int64_t c = 1; c < k; ++c)
            if (p[i * k + c] > bv) {
                bv = p[i * k + c];
                best = int32_t(c);
            }
        out[size_t(i)] = best;
    }
    return out;
}

}  // namespace vistra
