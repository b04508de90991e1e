#pragma once

#include <cstdint>

#include "vsseg/core.hpp"
#include "vsseg/nn/losses.hpp"

// Scribble supervision primitives: partial cross-entropy, pseudo-label
// creation, and the SSCR loss bundle. Graph-building variants live in
// nn/losses.hpp; the functions here are the concrete-map entry points used
// by evaluation and tests.

namespace vsseg::supervision {

struct LossBundle {
    double l_scr = 0.0;
    double l_cps = 0.0;
    double l_con = 0.0;
    double l_total = 0.0;
    double lambda1 = 1.0;
    double lambda2 = 0.5;

    static LossBundle compose(double scr, double cps, double con, double lambda1, double lambda2) {
        LossBundle b;
        b.l_scr = scr;
        b.l_cps = cps;
        b.l_con = con;
        b.lambda1 = lambda1;
        b.lambda2 = lambda2;
        b.l_total = scr + lambda1 * cps + lambda2 * con;
        return b;
    }
};

namespace detail {

template <typename T>
nn::Var<T> as_prob_var(const TensorT<T>& probs_2hw) {
    if (probs_2hw.rank() != 3 || probs_2hw.shape[0] != 2)
        throw ShapeMismatch("expected [2,H,W] probabilities, got " + shape_str(probs_2hw.shape));
    return nn::constant(TensorT<T>(probs_2hw));
}

}  // namespace detail

// 0.5 * soft Dice + 0.5 * mean cross-entropy on dense labels.
template <typename T>
double dice_ce_loss(const TensorT<T>& probs_2hw, const VesselMask& target) {
    nn::NoGradGuard guard;
    return nn::dice_ce(detail::as_prob_var(probs_2hw), target.pixels)->value[0];
}

// Cross-entropy restricted to annotated scribble pixels; 0 when nothing is
// annotated.
template <typename T>
double pce_loss(const TensorT<T>& probs_2hw, const ScribbleMask& scribble, bool normalize = true) {
    nn::NoGradGuard guard;
    return nn::pce_vs_scribble(detail::as_prob_var(probs_2hw), scribble.pixels, normalize)->value[0];
}

// Pseudo-label: annotated pixels copy the scribble; elsewhere the argmax of
// the class probabilities, ties breaking toward background.
template <typename T>
VesselMask make_pseudo_label(const TensorT<T>& probs_2hw, const ScribbleMask& scribble) {
    if (probs_2hw.rank() != 3 || probs_2hw.shape[0] != 2)
        throw ShapeMismatch("make_pseudo_label: probs " + shape_str(probs_2hw.shape));
    const std::size_t plane = probs_2hw.shape[1] * probs_2hw.shape[2];
    if (scribble.pixels.numel() != plane)
        throw ShapeMismatch("make_pseudo_label: scribble " + shape_str(scribble.pixels.shape));
    VesselMask out{TensorT<std::uint8_t>({probs_2hw.shape[1], probs_2hw.shape[2]})};
    for (std::size_t i = 0; i < plane; ++i) {
        if (scribble.pixels[i] != kUnannotated) {
            out.pixels[i] = scribble.pixels[i];
        } else {
            out.pixels[i] = probs_2hw[plane + i] > probs_2hw[i] ? 1 : 0;
        }
    }
    return out;
}

// Same rule on a raw tensor (graph value); used inside the trainers.
template <typename T>
TensorT<std::uint8_t> pseudo_label_plane(const TensorT<T>& probs_2hw,
                                         const TensorT<std::uint8_t>& scribble) {
    const std::size_t plane = probs_2hw.shape[1] * probs_2hw.shape[2];
    TensorT<std::uint8_t> out({probs_2hw.shape[1], probs_2hw.shape[2]});
    for (std::size_t i = 0; i < plane; ++i) {
        if (scribble[i] != kUnannotated) {
            out[i] = scribble[i];
        } else {
            out[i] = probs_2hw[plane + i] > probs_2hw[i] ? 1 : 0;
        }
    }
    return out;
}

// Mean squared difference between the one-hot encodings of two label maps:
// (#disagreeing pixels) / (H*W), since each disagreement contributes 2/(2HW).
inline double onehot_mse(const TensorT<std::uint8_t>& a, const TensorT<std::uint8_t>& b) {
    if (a.shape != b.shape) throw ShapeMismatch("onehot_mse");
    std::size_t diff = 0;
    for (std::size_t i = 0; i < a.numel(); ++i) diff += a[i] != b[i];
    return static_cast<double>(diff) / static_cast<double>(a.numel());
}

}  // namespace vsseg::supervision
