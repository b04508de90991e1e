#pragma once

#include <vector>

#include "vsseg/model/layers.hpp"

namespace vsseg::model {

// Gated recurrent unit whose gate and candidate transforms are 2D
// convolutions, so hidden states keep their spatial structure. Input and
// hidden state share the same channel count.
template <typename T>
struct ConvGruCell {
    Conv2dLayer<T> wz, uz;  // update gate
    Conv2dLayer<T> wr, ur;  // reset gate
    Conv2dLayer<T> wh, uh;  // candidate

    void collect(const std::string& prefix, NamedParams<T>& out) const {
        wz.collect(prefix + ".wz", out);
        uz.collect(prefix + ".uz", out);
        wr.collect(prefix + ".wr", out);
        ur.collect(prefix + ".ur", out);
        wh.collect(prefix + ".wh", out);
        uh.collect(prefix + ".uh", out);
    }
};

template <typename T>
ConvGruCell<T> make_convgru(std::size_t channels, int kernel, bool bias, Rng& rng) {
    ConvGruCell<T> cell;
    cell.wz = make_conv2d<T>(channels, channels, kernel, 1, bias, Init::glorot, rng);
    cell.uz = make_conv2d<T>(channels, channels, kernel, 1, false, Init::glorot, rng);
    cell.wr = make_conv2d<T>(channels, channels, kernel, 1, bias, Init::glorot, rng);
    cell.ur = make_conv2d<T>(channels, channels, kernel, 1, false, Init::glorot, rng);
    cell.wh = make_conv2d<T>(channels, channels, kernel, 1, bias, Init::glorot, rng);
    cell.uh = make_conv2d<T>(channels, channels, kernel, 1, false, Init::glorot, rng);
    return cell;
}

// One recurrence step:
//   z = sigmoid(Wz*x + Uz*h),  r = sigmoid(Wr*x + Ur*h)
//   cand = tanh(Wh*x + Uh*(r . h))
//   h' = (1-z) . h + z . cand
template <typename T>
nn::Var<T> convgru_step(const ConvGruCell<T>& cell, const nn::Var<T>& x,
                        const nn::Var<T>& h_prev) {
    if (!x->value.same_shape(h_prev->value))
        throw ShapeMismatch("convgru_step: x " + shape_str(x->value.shape) + " h " +
                            shape_str(h_prev->value.shape));
    auto z = nn::sigmoid(nn::add(cell.wz(x), cell.uz(h_prev)));
    auto r = nn::sigmoid(nn::add(cell.wr(x), cell.ur(h_prev)));
    auto cand = nn::tanh_op(nn::add(cell.wh(x), cell.uh(nn::mul(r, h_prev))));
    return nn::gated_blend(z, h_prev, cand);
}

// Unrolls the cell over a sequence with a zero initial state.
template <typename T>
std::vector<nn::Var<T>> convgru_scan(const ConvGruCell<T>& cell,
                                     const std::vector<nn::Var<T>>& xs, bool reverse) {
    std::vector<nn::Var<T>> hs(xs.size());
    auto h = nn::constant(TensorT<T>(xs[0]->value.shape, T(0)));
    if (!reverse) {
        for (std::size_t t = 0; t < xs.size(); ++t) {
            h = convgru_step(cell, xs[t], h);
            hs[t] = h;
        }
    } else {
        for (std::size_t t = xs.size(); t-- > 0;) {
            h = convgru_step(cell, xs[t], h);
            hs[t] = h;
        }
    }
    return hs;
}

}  // namespace vsseg::model
