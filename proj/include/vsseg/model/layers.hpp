#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "vsseg/nn/ops.hpp"
#include "vsseg/rng.hpp"

namespace vsseg::model {

template <typename T>
using NamedParams = std::vector<std::pair<std::string, nn::Var<T>>>;

enum class Init { he, glorot };

template <typename T>
struct Conv2dLayer {
    nn::Var<T> w;  // [Co, Ci, k, k]
    nn::Var<T> b;  // [Co] or empty
    int stride = 1;
    int pad = 0;

    nn::Var<T> operator()(const nn::Var<T>& x) const { return nn::conv2d(x, w, b, stride, pad); }

    std::size_t out_channels() const { return w->value.shape[0]; }

    void collect(const std::string& prefix, NamedParams<T>& out) const {
        out.emplace_back(prefix + ".w", w);
        if (b) out.emplace_back(prefix + ".b", b);
    }
};

template <typename T>
Conv2dLayer<T> make_conv2d(std::size_t ci, std::size_t co, int k, int stride, bool bias, Init init,
                           Rng& rng) {
    TensorT<T> w({co, ci, static_cast<std::size_t>(k), static_cast<std::size_t>(k)});
    const double fan_in = static_cast<double>(ci) * k * k;
    const double fan_out = static_cast<double>(co) * k * k;
    const double stddev = init == Init::he ? std::sqrt(2.0 / fan_in)
                                           : std::sqrt(2.0 / (fan_in + fan_out));
    for (auto& v : w.data) v = static_cast<T>(rng.normal(0.0, stddev));
    Conv2dLayer<T> layer;
    layer.w = nn::leaf(std::move(w), true);
    if (bias) layer.b = nn::leaf(TensorT<T>({co}, T(0)), true);
    layer.stride = stride;
    layer.pad = k / 2;
    return layer;
}

template <typename T>
struct Conv3dLayer {
    nn::Var<T> w;  // [Co, Ci, kf, kh, kw]
    nn::Var<T> b;
    int pad_f = 1;
    int pad_hw = 1;

    nn::Var<T> operator()(const nn::Var<T>& x) const { return nn::conv3d(x, w, b, pad_f, pad_hw); }

    void collect(const std::string& prefix, NamedParams<T>& out) const {
        out.emplace_back(prefix + ".w", w);
        if (b) out.emplace_back(prefix + ".b", b);
    }
};

template <typename T>
Conv3dLayer<T> make_conv3d(std::size_t ci, std::size_t co, int kf, int khw, bool bias, Rng& rng) {
    TensorT<T> w({co, ci, static_cast<std::size_t>(kf), static_cast<std::size_t>(khw),
                  static_cast<std::size_t>(khw)});
    const double fan_in = static_cast<double>(ci) * kf * khw * khw;
    for (auto& v : w.data) v = static_cast<T>(rng.normal(0.0, std::sqrt(2.0 / fan_in)));
    Conv3dLayer<T> layer;
    layer.w = nn::leaf(std::move(w), true);
    if (bias) layer.b = nn::leaf(TensorT<T>({co}, T(0)), true);
    layer.pad_f = kf / 2;
    layer.pad_hw = khw / 2;
    return layer;
}

// Bilinear resize of a [C,H,W] tensor (align-corners). Used to bring raw
// frames to each stage resolution; runs outside the autodiff graph.
template <typename T>
TensorT<T> resize_bilinear(const TensorT<T>& x, std::size_t h2, std::size_t w2) {
    const std::size_t c = x.shape[0], h = x.shape[1], w = x.shape[2];
    TensorT<T> out({c, h2, w2});
    const double sy = h2 > 1 ? static_cast<double>(h - 1) / static_cast<double>(h2 - 1) : 0.0;
    const double sx = w2 > 1 ? static_cast<double>(w - 1) / static_cast<double>(w2 - 1) : 0.0;
    for (std::size_t ci = 0; ci < c; ++ci) {
        const T* src = x.ptr() + ci * h * w;
        T* dst = out.ptr() + ci * h2 * w2;
        for (std::size_t y = 0; y < h2; ++y) {
            const double fy = h2 > 1 ? y * sy : (h - 1) / 2.0;
            const auto y0 = static_cast<std::size_t>(fy);
            const std::size_t y1 = std::min(y0 + 1, h - 1);
            const double wy = fy - static_cast<double>(y0);
            for (std::size_t xx = 0; xx < w2; ++xx) {
                const double fx = w2 > 1 ? xx * sx : (w - 1) / 2.0;
                const auto x0 = static_cast<std::size_t>(fx);
                const std::size_t x1 = std::min(x0 + 1, w - 1);
                const double wx = fx - static_cast<double>(x0);
                const double top = src[y0 * w + x0] * (1 - wx) + src[y0 * w + x1] * wx;
                const double bot = src[y1 * w + x0] * (1 - wx) + src[y1 * w + x1] * wx;
                dst[y * w2 + xx] = static_cast<T>(top * (1 - wy) + bot * wy);
            }
        }
    }
    return out;
}

}  // namespace vsseg::model
