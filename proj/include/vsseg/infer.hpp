#pragma once

#include <vector>

#include "vsseg/core.hpp"
#include "vsseg/eval.hpp"
#include "vsseg/nn/graph.hpp"

// Full-image inference: overlapping tiles with averaged probabilities.

namespace vsseg::infer {

// Tile positions covering [0, extent) with the requested stride; the last
// tile snaps to the border.
inline std::vector<std::size_t> tile_positions(std::size_t extent, std::size_t tile,
                                               std::size_t stride) {
    std::vector<std::size_t> out;
    if (tile >= extent) return {0};
    for (std::size_t p = 0;; p += stride) {
        if (p + tile >= extent) {
            out.push_back(extent - tile);
            break;
        }
        out.push_back(p);
    }
    return out;
}

// Model: anything exposing forward([F,h,w]) -> {probs: Var [2,h,w]}.
template <typename Model>
ProbabilityMap tiled_inference(const Model& model, const DsaSequence& seq, std::size_t tile,
                               double overlap = 0.5) {
    const std::size_t f = seq.num_frames(), h = seq.height(), w = seq.width();
    if (tile > h || tile > w)
        throw ShapeMismatch("tiled_inference: tile " + std::to_string(tile) + " exceeds image " +
                            std::to_string(h) + "x" + std::to_string(w));
    const auto stride = std::max<std::size_t>(1, static_cast<std::size_t>(tile * (1.0 - overlap)));
    const auto ys = tile_positions(h, tile, stride);
    const auto xs = tile_positions(w, tile, stride);

    TensorT<double> acc({h, w}, 0.0);
    TensorT<double> cnt({h, w}, 0.0);
    nn::NoGradGuard guard;
    Tensor patch({f, tile, tile});
    for (std::size_t y0 : ys) {
        for (std::size_t x0 : xs) {
            for (std::size_t t = 0; t < f; ++t)
                for (std::size_t y = 0; y < tile; ++y)
                    std::copy_n(seq.frames.ptr() + (t * h + y0 + y) * w + x0, tile,
                                patch.ptr() + (t * tile + y) * tile);
            auto fwd = model.forward(patch);
            const float* vessel = fwd.probs->value.ptr() + tile * tile;
            for (std::size_t y = 0; y < tile; ++y)
                for (std::size_t x = 0; x < tile; ++x) {
                    acc.at(y0 + y, x0 + x) += vessel[y * tile + x];
                    cnt.at(y0 + y, x0 + x) += 1.0;
                }
        }
    }
    ProbabilityMap out{Tensor({h, w})};
    for (std::size_t i = 0; i < h * w; ++i) out.probs[i] = static_cast<float>(acc[i] / cnt[i]);
    return out;
}

// Mean DSC over (sequence, dense label) pairs at the given threshold.
template <typename Model, typename Items>
double mean_dsc(const Model& model, const Items& items, std::size_t tile, double threshold) {
    if (items.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& item : items) {
        auto probs = tiled_inference(model, item.seq, tile);
        auto pred = eval::binarize(probs, threshold);
        sum += eval::scalar_metrics(eval::confusion(pred, VesselMask{item.label})).dsc;
    }
    return sum / static_cast<double>(items.size());
}

// Full metric suite over (sequence, dense label) pairs; per-sequence macro
// mean.
template <typename Model, typename Items>
MetricsReport evaluate_model(const Model& model, const Items& items, std::size_t tile,
                             double threshold = 0.5) {
    std::vector<MetricsReport> per;
    per.reserve(items.size());
    for (const auto& item : items) {
        auto probs = tiled_inference(model, item.seq, tile);
        per.push_back(eval::metrics_for(probs, VesselMask{item.label}, threshold));
    }
    return eval::mean_report(per);
}

}  // namespace vsseg::infer
