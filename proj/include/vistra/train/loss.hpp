#pragma once

#include "vistra/ops/loss.hpp"
#include "vistra/setr/decoder.hpp"

namespace vistra {

// Pixel-wise cross-entropy on the main logits plus aux_weight times the sum
// of auxiliary-head cross-entropies. Main loss and aux losses see the same
// mask; ignore-index pixels contribute nothing.
template <typename T>
Tensor<T> seg_loss(const SegmentationOutput<T>& out, const std::vector<int32_t>& mask, double aux_weight) {
    const int64_t h = out.logits.shape[0], w = out.logits.shape[1], k = out.logits.shape[2];
    if (int64_t(mask.size()) != h * w)
        fail_shape("seg_loss: mask has ", mask.size(), " pixels for ", h, "x", w, " logits");
    auto total = softmax_cross_entropy(reshape(out.logits, {h * w, k}), mask);
    if (aux_weight != 0.0) {
        for (const auto& aux : out.aux_logits) {
            auto a = softmax_cross_entropy(reshape(aux, {h * w, k}), mask);
            total = add(total, scale(a, T(aux_weight)));
        }
    }
    return total;
}

}  // namespace vistra
