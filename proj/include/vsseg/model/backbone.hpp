#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "vsseg/model/layers.hpp"

namespace vsseg::model {

// A 2D segmentation backbone consuming one feature map per encoder stage
// (spatial size halving per stage) and emitting a 2-channel logit map at the
// stage-0 resolution.
template <typename T>
class Backbone2d {
public:
    virtual ~Backbone2d() = default;
    virtual nn::Var<T> forward(const std::vector<nn::Var<T>>& stage_maps) = 0;
    virtual void collect(const std::string& prefix, NamedParams<T>& out) const = 0;
};

// Plain U-shaped encoder-decoder. Stage maps are concatenated in front of
// each encoder stage's convolutions; the decoder upsamples, fuses skips and
// ends in a 1x1 two-class head.
template <typename T>
class UShapedBackbone final : public Backbone2d<T> {
public:
    UShapedBackbone(const std::vector<std::size_t>& map_channels,
                    const std::vector<std::size_t>& widths, Rng& rng) {
        const std::size_t stages = widths.size();
        enc1_.resize(stages);
        enc2_.resize(stages);
        for (std::size_t s = 0; s < stages; ++s) {
            const std::size_t in = s == 0 ? map_channels[0] : widths[s - 1] + map_channels[s];
            enc1_[s] = make_conv2d<T>(in, widths[s], 3, 1, true, Init::he, rng);
            enc2_[s] = make_conv2d<T>(widths[s], widths[s], 3, 1, true, Init::he, rng);
        }
        dec_up_.resize(stages - 1);
        dec_fuse_.resize(stages - 1);
        for (std::size_t s = 0; s + 1 < stages; ++s) {
            dec_up_[s] = make_conv2d<T>(widths[s + 1], widths[s], 3, 1, true, Init::he, rng);
            dec_fuse_[s] = make_conv2d<T>(2 * widths[s], widths[s], 3, 1, true, Init::he, rng);
        }
        head_ = make_conv2d<T>(widths[0], 2, 1, 1, true, Init::he, rng);
    }

    // Null entries in stage_maps (beyond stage 0) mean "no injection at this
    // stage"; that is how the same code serves as a plain 2D U-net.
    nn::Var<T> forward(const std::vector<nn::Var<T>>& stage_maps) override {
        const std::size_t stages = enc1_.size();
        if (stage_maps.size() != stages) throw ShapeMismatch("backbone: stage map count");
        if (!stage_maps[0]) throw ShapeMismatch("backbone: stage 0 map required");
        std::vector<nn::Var<T>> skips(stages);
        nn::Var<T> x;
        for (std::size_t s = 0; s < stages; ++s) {
            nn::Var<T> in;
            if (s == 0) {
                in = stage_maps[0];
            } else if (stage_maps[s]) {
                in = nn::concat_channels<T>({nn::maxpool2(x), stage_maps[s]});
            } else {
                in = nn::maxpool2(x);
            }
            x = nn::relu(enc2_[s](nn::relu(enc1_[s](in))));
            skips[s] = x;
        }
        for (std::size_t s = stages - 1; s-- > 0;) {
            auto up = nn::relu(dec_up_[s](nn::upsample_nearest2(x)));
            x = nn::relu(dec_fuse_[s](nn::concat_channels<T>({up, skips[s]})));
        }
        return head_(x);
    }

    void collect(const std::string& prefix, NamedParams<T>& out) const override {
        for (std::size_t s = 0; s < enc1_.size(); ++s) {
            enc1_[s].collect(prefix + ".enc" + std::to_string(s) + ".conv1", out);
            enc2_[s].collect(prefix + ".enc" + std::to_string(s) + ".conv2", out);
        }
        for (std::size_t s = 0; s < dec_up_.size(); ++s) {
            dec_up_[s].collect(prefix + ".dec" + std::to_string(s) + ".up", out);
            dec_fuse_[s].collect(prefix + ".dec" + std::to_string(s) + ".fuse", out);
        }
        head_.collect(prefix + ".head", out);
    }

private:
    std::vector<Conv2dLayer<T>> enc1_, enc2_;
    std::vector<Conv2dLayer<T>> dec_up_, dec_fuse_;
    Conv2dLayer<T> head_;
};

// Backbones are pluggable by name so alternative U-shaped designs can be
// dropped in without touching the SFEM stack.
template <typename T>
using BackboneFactory = std::function<std::unique_ptr<Backbone2d<T>>(
    const std::vector<std::size_t>& map_channels, const std::vector<std::size_t>& widths, Rng&)>;

template <typename T>
std::map<std::string, BackboneFactory<T>>& backbone_registry() {
    static std::map<std::string, BackboneFactory<T>> reg = {
        {"unet",
         [](const std::vector<std::size_t>& map_channels, const std::vector<std::size_t>& widths,
            Rng& rng) -> std::unique_ptr<Backbone2d<T>> {
             return std::make_unique<UShapedBackbone<T>>(map_channels, widths, rng);
         }},
    };
    return reg;
}

template <typename T>
std::unique_ptr<Backbone2d<T>> make_backbone(const std::string& name,
                                             const std::vector<std::size_t>& map_channels,
                                             const std::vector<std::size_t>& widths, Rng& rng) {
    auto& reg = backbone_registry<T>();
    auto it = reg.find(name);
    if (it == reg.end()) throw ConfigError("unknown backbone: " + name);
    return it->second(map_channels, widths, rng);
}

}  // namespace vsseg::model
