#pragma once

#include <memory>

#include "vsseg/core.hpp"
#include "vsseg/model/backbone.hpp"

// Dimensionality-reduction adapters that turn generic 2D/3D segmentation
// models into sequence-to-plane models:
//   2D route: the singleton channel axis is squeezed and the frame axis
//             becomes the model's input channels.
//   3D route: the model runs on the volume, its (single) channel axis is
//             squeezed, and a 1x1 convolution maps frames to classes.

namespace vsseg::model {

// A plain 2D U-net over an arbitrary-channel input image; the demo "any 2D
// model" for the DR adapter and the WSS/DR baselines.
template <typename T>
class Plain2dUnet {
public:
    Plain2dUnet(std::size_t in_channels, std::vector<std::size_t> widths, Rng& rng) {
        std::vector<std::size_t> map_channels(widths.size(), 0);
        map_channels[0] = in_channels;
        net_ = std::make_unique<UShapedBackbone<T>>(map_channels, widths, rng);
        stages_ = widths.size();
        in_channels_ = in_channels;
    }

    std::size_t in_channels() const { return in_channels_; }

    nn::Var<T> forward_logits(const nn::Var<T>& image) const {
        std::vector<nn::Var<T>> maps(stages_);
        maps[0] = image;
        return net_->forward(maps);
    }

    NamedParams<T> named_params() const {
        NamedParams<T> out;
        net_->collect("unet2d", out);
        return out;
    }

private:
    std::unique_ptr<UShapedBackbone<T>> net_;
    std::size_t stages_ = 0;
    std::size_t in_channels_ = 0;
};

// Minimal 3D model: two 3x3x3 convolutions ending in a single-channel head,
// i.e. [1,F,H,W] -> [1,F,H,W].
template <typename T>
class Small3dNet {
public:
    Small3dNet(std::size_t width, Rng& rng) {
        c1_ = make_conv3d<T>(1, width, 3, 3, true, rng);
        c2_ = make_conv3d<T>(width, 1, 3, 3, true, rng);
    }

    nn::Var<T> forward(const nn::Var<T>& volume) const { return c2_(nn::relu(c1_(volume))); }

    NamedParams<T> named_params() const {
        NamedParams<T> out;
        c1_.collect("net3d.conv1", out);
        c2_.collect("net3d.conv2", out);
        return out;
    }

private:
    Conv3dLayer<T> c1_, c2_;
};

namespace detail {

template <typename T>
TensorT<T> squeeze_leading(const TensorT<T>& seq_1fhw) {
    if (seq_1fhw.rank() != 4 || seq_1fhw.shape[0] != 1)
        throw ShapeMismatch("DR adapter: expected [1,F,H,W], got " + shape_str(seq_1fhw.shape));
    TensorT<T> out({seq_1fhw.shape[1], seq_1fhw.shape[2], seq_1fhw.shape[3]});
    out.data = seq_1fhw.data;
    return out;
}

template <typename T>
ProbabilityMap vessel_prob(const nn::Var<T>& probs) {
    const std::size_t h = probs->value.shape[1], w = probs->value.shape[2];
    ProbabilityMap out{Tensor({h, w})};
    const T* vessel = probs->value.ptr() + h * w;
    for (std::size_t i = 0; i < h * w; ++i) out.probs[i] = static_cast<float>(vessel[i]);
    return out;
}

}  // namespace detail

// y = H2d(Squ(x)): squeeze the channel axis, frames become input channels.
template <typename T, typename Model2d>
nn::Var<T> dr2d_logits(const Model2d& model, const TensorT<T>& seq_1fhw) {
    auto squeezed = detail::squeeze_leading(seq_1fhw);
    if (model.in_channels() != squeezed.shape[0])
        throw ShapeMismatch("dr_wrap_2d: model expects " + std::to_string(model.in_channels()) +
                            " channels, sequence has " + std::to_string(squeezed.shape[0]) +
                            " frames");
    return model.forward_logits(nn::constant(std::move(squeezed)));
}

template <typename T, typename Model2d>
ProbabilityMap dr_wrap_2d(const Model2d& model, const TensorT<T>& seq_1fhw) {
    nn::NoGradGuard guard;
    return detail::vessel_prob(nn::softmax_channels(dr2d_logits(model, seq_1fhw)));
}

// 3D route: the wrapper owns the trailing 1x1 frame-to-class convolution.
template <typename T, typename Model3d>
class Dr3dAdapter {
public:
    Dr3dAdapter(Model3d model, std::size_t frames, std::size_t num_classes, Rng& rng)
        : model_(std::move(model)) {
        head_ = make_conv2d<T>(frames, num_classes, 1, 1, true, Init::glorot, rng);
    }

    Model3d& model() { return model_; }
    Conv2dLayer<T>& head() { return head_; }

    nn::Var<T> forward_logits(const TensorT<T>& seq_1fhw) const {
        auto volume = nn::constant(TensorT<T>(seq_1fhw));
        auto y = model_.forward(volume);  // [C',F,H,W]
        if (y->value.rank() != 4 || y->value.shape[0] != 1)
            throw ShapeMismatch("dr_wrap_3d: 3D model must emit one channel, got " +
                                shape_str(y->value.shape));
        // Squeeze C'=1: reinterpret [1,F,H,W] as [F,H,W].
        TensorT<T> squeezed({y->value.shape[1], y->value.shape[2], y->value.shape[3]});
        squeezed.data = y->value.data;
        nn::Node<T>* yn = y.get();
        auto frames_as_channels = nn::make_node<T>(
            std::move(squeezed), {y}, [yn](nn::Node<T>& self) {
                yn->ensure_grad();
                for (std::size_t i = 0; i < self.grad.numel(); ++i) yn->grad[i] += self.grad[i];
            });
        return head_(frames_as_channels);
    }

    NamedParams<T> named_params() const {
        auto out = model_.named_params();
        head_.collect("dr3d.head", out);
        return out;
    }

private:
    Model3d model_;
    Conv2dLayer<T> head_;
};

template <typename T, typename Model3d>
ProbabilityMap dr_wrap_3d(const Dr3dAdapter<T, Model3d>& adapter, const TensorT<T>& seq_1fhw) {
    nn::NoGradGuard guard;
    if (seq_1fhw.rank() != 4 || seq_1fhw.shape[0] != 1)
        throw ShapeMismatch("dr_wrap_3d: expected [1,F,H,W], got " + shape_str(seq_1fhw.shape));
    return detail::vessel_prob(nn::softmax_channels(adapter.forward_logits(seq_1fhw)));
}

}  // namespace vsseg::model
