#pragma once

#include <vector>

#include "vsseg/core.hpp"
#include "vsseg/model/convgru.hpp"

namespace vsseg::model {

// Sequence feature extraction module for one scale. Per stage:
//   WSC fusion of the (resized) raw frames with incoming features,
//   bidirectional ConvGRU, learned fusion of the two directions,
//   sequence global max pooling (the 2D injection map), and a
//   weight-shared stride-2 downsampling that feeds the next stage.
template <typename T>
struct SfemStage {
    // Stage 0 lifts the raw frame directly (no concat); later stages fuse
    // the concatenation [frame, features] and halve its channel count.
    Conv2dLayer<T> wsc;             // 1x1, shared across frames
    ConvGruCell<T> fwd_gru, bwd_gru;
    Conv2dLayer<T> fuse_f, fuse_b;  // W_f, W_b of the direction fusion
    Conv2dLayer<T> wsd;             // 3x3 stride-2, shared across frames

    void collect(const std::string& prefix, NamedParams<T>& out) const {
        wsc.collect(prefix + ".wsc", out);
        fwd_gru.collect(prefix + ".fwd_gru", out);
        bwd_gru.collect(prefix + ".bwd_gru", out);
        fuse_f.collect(prefix + ".fuse_f", out);
        fuse_b.collect(prefix + ".fuse_b", out);
        wsd.collect(prefix + ".wsd", out);
    }
};

// in_feats = 0 builds a stage-0 module (raw lift); otherwise the WSC input
// is in_feats + 1 raw channel and the output is halved.
template <typename T>
SfemStage<T> make_sfem_stage(std::size_t in_feats, std::size_t channels, std::size_t down_channels,
                             int gru_kernel, bool gru_bias, Rng& rng) {
    SfemStage<T> s;
    const std::size_t wsc_in = in_feats == 0 ? 1 : in_feats + 1;
    s.wsc = make_conv2d<T>(wsc_in, channels, 1, 1, true, Init::glorot, rng);
    s.fwd_gru = make_convgru<T>(channels, gru_kernel, gru_bias, rng);
    s.bwd_gru = make_convgru<T>(channels, gru_kernel, gru_bias, rng);
    s.fuse_f = make_conv2d<T>(channels, channels, gru_kernel, 1, false, Init::glorot, rng);
    s.fuse_b = make_conv2d<T>(channels, channels, gru_kernel, 1, false, Init::glorot, rng);
    s.wsd = make_conv2d<T>(channels, down_channels, 3, 2, true, Init::he, rng);
    return s;
}

// Per-frame concat of [frame, features] followed by one shared 1x1
// convolution. The same kernel is applied to every frame.
template <typename T>
std::vector<nn::Var<T>> wsc_fuse(const Conv2dLayer<T>& wsc, const std::vector<nn::Var<T>>& frames,
                                 const std::vector<nn::Var<T>>& feats) {
    if (frames.size() != feats.size()) throw ShapeMismatch("wsc_fuse: frame/feature count");
    std::vector<nn::Var<T>> out(frames.size());
    for (std::size_t t = 0; t < frames.size(); ++t) {
        if (frames[t]->value.shape[1] != feats[t]->value.shape[1] ||
            frames[t]->value.shape[2] != feats[t]->value.shape[2])
            throw ShapeMismatch("wsc_fuse: spatial dims");
        out[t] = wsc(nn::concat_channels<T>({frames[t], feats[t]}));
    }
    return out;
}

// Forward and backward ConvGRU passes (both from zero initial state) fused
// per frame: h_t = tanh(W_f * h_t_fwd + W_b * h_t_bwd).
template <typename T>
std::vector<nn::Var<T>> bidirectional_fuse(const SfemStage<T>& stage,
                                           const std::vector<nn::Var<T>>& xs) {
    auto hf = convgru_scan(stage.fwd_gru, xs, false);
    auto hb = convgru_scan(stage.bwd_gru, xs, true);
    std::vector<nn::Var<T>> out(xs.size());
    for (std::size_t t = 0; t < xs.size(); ++t)
        out[t] = nn::tanh_op(nn::add(stage.fuse_f(hf[t]), stage.fuse_b(hb[t])));
    return out;
}

template <typename T>
struct SfemOutput {
    std::vector<nn::Var<T>> feats_next;  // [T] x [D, H/2, W/2]
    nn::Var<T> map2d;                    // [C, H, W]
    std::vector<nn::Var<T>> hidden;      // fused hidden sequence, for inspection
};

// The fused hidden sequence of one stage as a concrete [T,C,H,W] stack.
template <typename T>
SequenceFeatureState feature_state(const std::vector<nn::Var<T>>& hidden, int stage) {
    const auto& shape = hidden[0]->value.shape;
    SequenceFeatureState out;
    out.stage = stage;
    out.maps = Tensor({hidden.size(), shape[0], shape[1], shape[2]});
    const std::size_t stride = shape[0] * shape[1] * shape[2];
    for (std::size_t t = 0; t < hidden.size(); ++t)
        for (std::size_t i = 0; i < stride; ++i)
            out.maps[t * stride + i] = static_cast<float>(hidden[t]->value[i]);
    return out;
}

// One full stage. `raw_frames` must already be resized to this stage's
// resolution; `feats_in` is empty exactly at stage 0.
template <typename T>
SfemOutput<T> sfem_forward(const SfemStage<T>& stage, const std::vector<nn::Var<T>>& raw_frames,
                           const std::vector<nn::Var<T>>& feats_in) {
    std::vector<nn::Var<T>> xs;
    if (feats_in.empty()) {
        xs.reserve(raw_frames.size());
        for (const auto& f : raw_frames) xs.push_back(stage.wsc(f));
    } else {
        xs = wsc_fuse(stage.wsc, raw_frames, feats_in);
    }
    SfemOutput<T> out;
    out.hidden = bidirectional_fuse(stage, xs);
    out.map2d = nn::max_over(out.hidden);
    out.feats_next.reserve(xs.size());
    for (const auto& h : out.hidden) out.feats_next.push_back(stage.wsd(h));
    return out;
}

}  // namespace vsseg::model
