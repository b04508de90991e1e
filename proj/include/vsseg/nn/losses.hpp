#pragma once

#include <cmath>
#include <cstdint>

#include "vsseg/core.hpp"
#include "vsseg/nn/ops.hpp"

// Loss nodes over [2,H,W] class-probability maps. Targets are plain integer
// masks (never differentiated through).

namespace vsseg::nn {

inline constexpr double kLogClamp = 1e-12;

// Soft Dice loss on the vessel channel:
// 1 - (2*sum(p1*t) + smooth) / (sum(p1) + sum(t) + smooth).
template <typename T>
Var<T> soft_dice_vessel(const Var<T>& probs, const TensorT<std::uint8_t>& target,
                        T smooth = T(1e-5)) {
    const std::size_t plane = probs->value.shape[1] * probs->value.shape[2];
    if (target.numel() != plane) throw ShapeMismatch("soft_dice_vessel");
    const T* p1 = probs->value.ptr() + plane;
    double inter_d = 0.0, psum_d = 0.0, tsum_d = 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
        const double t = static_cast<double>(target[i]);
        inter_d += static_cast<double>(p1[i]) * t;
        psum_d += p1[i];
        tsum_d += t;
    }
    const T inter = static_cast<T>(inter_d);
    const T denom = static_cast<T>(psum_d + tsum_d + static_cast<double>(smooth));
    TensorT<T> out({1});
    out[0] = static_cast<T>(1.0 - (2.0 * inter_d + static_cast<double>(smooth)) /
                                      static_cast<double>(denom));

    Node<T>* pn = probs.get();
    auto tgt = target;  // keep alive in the closure
    return make_node<T>(std::move(out), {probs},
                        [pn, tgt = std::move(tgt), plane, inter, denom, smooth](Node<T>& self) {
        pn->ensure_grad();
        const T g = self.grad[0];
        const T num = T(2) * inter + smooth;
        T* dp1 = pn->grad.ptr() + plane;
        for (std::size_t i = 0; i < plane; ++i) {
            const T t = static_cast<T>(tgt[i]);
            // d/dp1 of -(2A+s)/(B+C+s)
            dp1[i] += g * (-(T(2) * t * denom - num) / (denom * denom));
        }
    });
}

// Mean cross-entropy of probabilities against a dense {0,1} mask.
template <typename T>
Var<T> ce_vs_mask(const Var<T>& probs, const TensorT<std::uint8_t>& target) {
    const std::size_t plane = probs->value.shape[1] * probs->value.shape[2];
    if (target.numel() != plane) throw ShapeMismatch("ce_vs_mask");
    double acc = 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
        const T p = probs->value[static_cast<std::size_t>(target[i]) * plane + i];
        acc -= std::log(static_cast<double>(std::max(p, static_cast<T>(kLogClamp))));
    }
    TensorT<T> out({1});
    out[0] = static_cast<T>(acc / static_cast<double>(plane));

    Node<T>* pn = probs.get();
    auto tgt = target;
    return make_node<T>(std::move(out), {probs}, [pn, tgt = std::move(tgt), plane](Node<T>& self) {
        pn->ensure_grad();
        const T g = self.grad[0] / static_cast<T>(plane);
        for (std::size_t i = 0; i < plane; ++i) {
            const std::size_t idx = static_cast<std::size_t>(tgt[i]) * plane + i;
            const T p = pn->value[idx];
            if (p > static_cast<T>(kLogClamp)) pn->grad[idx] -= g / p;
        }
    });
}

// Partial cross-entropy: cross-entropy restricted to annotated scribble
// pixels (value != 255). Empty annotation sets yield 0.
template <typename T>
Var<T> pce_vs_scribble(const Var<T>& probs, const TensorT<std::uint8_t>& scribble,
                       bool normalize = true) {
    const std::size_t plane = probs->value.shape[1] * probs->value.shape[2];
    if (scribble.numel() != plane) throw ShapeMismatch("pce_vs_scribble");
    double acc = 0.0;
    std::size_t annotated = 0;
    for (std::size_t i = 0; i < plane; ++i) {
        if (scribble[i] == kUnannotated) continue;
        ++annotated;
        const T p = probs->value[static_cast<std::size_t>(scribble[i]) * plane + i];
        acc -= std::log(static_cast<double>(std::max(p, static_cast<T>(kLogClamp))));
    }
    const T norm = normalize ? static_cast<T>(annotated ? annotated : 1) : T(1);
    TensorT<T> out({1});
    out[0] = annotated ? static_cast<T>(acc / static_cast<double>(norm)) : T(0);

    Node<T>* pn = probs.get();
    auto scr = scribble;
    return make_node<T>(std::move(out), {probs},
                        [pn, scr = std::move(scr), plane, norm](Node<T>& self) {
        pn->ensure_grad();
        const T g = self.grad[0] / norm;
        for (std::size_t i = 0; i < plane; ++i) {
            if (scr[i] == kUnannotated) continue;
            const std::size_t idx = static_cast<std::size_t>(scr[i]) * plane + i;
            const T p = pn->value[idx];
            if (p > static_cast<T>(kLogClamp)) pn->grad[idx] -= g / p;
        }
    });
}

// Mean squared error between two same-shape tensors.
template <typename T>
Var<T> mse(const Var<T>& a, const Var<T>& b) {
    if (!a->value.same_shape(b->value)) throw ShapeMismatch("mse");
    const std::size_t n = a->value.numel();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(a->value[i]) - static_cast<double>(b->value[i]);
        acc += d * d;
    }
    TensorT<T> out({1});
    out[0] = static_cast<T>(acc / static_cast<double>(n));
    Node<T>* an = a.get();
    Node<T>* bn = b.get();
    return make_node<T>(std::move(out), {a, b}, [an, bn, n](Node<T>& self) {
        const T g = T(2) * self.grad[0] / static_cast<T>(n);
        if (an->requires_grad) an->ensure_grad();
        if (bn->requires_grad) bn->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) {
            const T d = an->value[i] - bn->value[i];
            if (an->requires_grad) an->grad[i] += g * d;
            if (bn->requires_grad) bn->grad[i] -= g * d;
        }
    });
}

// 0.5 * soft Dice + 0.5 * cross-entropy; the fully-supervised objective.
template <typename T>
Var<T> dice_ce(const Var<T>& probs, const TensorT<std::uint8_t>& target) {
    auto d = soft_dice_vessel(probs, target);
    auto c = ce_vs_mask(probs, target);
    return axpy(scale(d, T(0.5)), T(0.5), c);
}

}  // namespace vsseg::nn
