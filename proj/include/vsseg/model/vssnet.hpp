#pragma once

#include <memory>
#include <string>
#include <vector>

#include "vsseg/core.hpp"
#include "vsseg/model/backbone.hpp"
#include "vsseg/model/sfem.hpp"

namespace vsseg::model {

struct VssNetConfig {
    std::size_t stages = 4;
    std::vector<std::size_t> sfem_channels = {8, 16, 32, 64};      // per-stage GRU width
    std::vector<std::size_t> backbone_channels = {16, 32, 64, 128};
    int gru_kernel = 3;
    bool gru_bias = false;
    std::size_t seq_len = 8;
    std::string backbone = "unet";
};

// Vessel sequence segmentation network: a multi-scale SFEM stack whose
// per-stage 2D maps are injected into a U-shaped 2D backbone. Output is a
// two-class softmax at the input resolution.
template <typename T>
class VssNet {
public:
    VssNet(VssNetConfig cfg, Rng& rng) : cfg_(std::move(cfg)) {
        if (cfg_.sfem_channels.size() != cfg_.stages || cfg_.backbone_channels.size() != cfg_.stages)
            throw ConfigError("vssnet: channel plans must list one width per stage");
        stages_.reserve(cfg_.stages);
        for (std::size_t s = 0; s < cfg_.stages; ++s) {
            // WSD doubles the next stage's width so the halving WSC lands
            // exactly on the plan: ((2c)+1)//2 == c.
            const std::size_t in_feats = s == 0 ? 0 : 2 * cfg_.sfem_channels[s];
            const std::size_t down = s + 1 < cfg_.stages ? 2 * cfg_.sfem_channels[s + 1]
                                                         : 2 * cfg_.sfem_channels[s];
            stages_.push_back(make_sfem_stage<T>(in_feats, cfg_.sfem_channels[s], down,
                                                 cfg_.gru_kernel, cfg_.gru_bias, rng));
        }
        backbone_ = make_backbone<T>(cfg_.backbone, cfg_.sfem_channels, cfg_.backbone_channels, rng);
    }

    const VssNetConfig& config() const { return cfg_; }

    struct Forward {
        nn::Var<T> probs;                   // [2, H, W]
        std::vector<nn::Var<T>> stage_maps; // SFEM map2d per stage
    };

    // seq: [F, H, W] raw (normalized) frames.
    Forward forward(const TensorT<T>& seq) const {
        if (seq.rank() != 3 || seq.shape[0] != cfg_.seq_len)
            throw ShapeMismatch("vssnet: expected [" + std::to_string(cfg_.seq_len) +
                                ",H,W], got " + shape_str(seq.shape));
        const std::size_t h = seq.shape[1], w = seq.shape[2];
        const std::size_t div = std::size_t(1) << (cfg_.stages - 1);
        if (h % div || w % div)
            throw ShapeMismatch("vssnet: spatial dims must be divisible by " + std::to_string(div));

        // Raw frames at each stage resolution (constants in the graph).
        const std::size_t t_len = seq.shape[0];
        std::vector<std::vector<nn::Var<T>>> raw(cfg_.stages);
        for (std::size_t t = 0; t < t_len; ++t) {
            TensorT<T> frame({1, h, w});
            std::copy_n(seq.ptr() + t * h * w, h * w, frame.ptr());
            raw[0].push_back(nn::constant(std::move(frame)));
        }
        for (std::size_t s = 1; s < cfg_.stages; ++s) {
            const std::size_t hs = h >> s, ws = w >> s;
            raw[s].reserve(t_len);
            for (std::size_t t = 0; t < t_len; ++t)
                raw[s].push_back(nn::constant(resize_bilinear(raw[0][t]->value, hs, ws)));
        }

        Forward out;
        std::vector<nn::Var<T>> feats;  // empty at stage 0
        for (std::size_t s = 0; s < cfg_.stages; ++s) {
            auto stage_out = sfem_forward(stages_[s], raw[s], feats);
            out.stage_maps.push_back(stage_out.map2d);
            feats = std::move(stage_out.feats_next);
        }
        out.probs = nn::softmax_channels(backbone_->forward(out.stage_maps));
        return out;
    }

    const std::vector<SfemStage<T>>& sfem_stages() const { return stages_; }

    NamedParams<T> named_params() const {
        NamedParams<T> out;
        for (std::size_t s = 0; s < stages_.size(); ++s)
            stages_[s].collect("sfem." + std::to_string(s), out);
        backbone_->collect("backbone", out);
        return out;
    }

    std::vector<nn::Var<T>> params() const {
        std::vector<nn::Var<T>> out;
        for (auto&& [name, p] : named_params()) out.push_back(p);
        return out;
    }

private:
    VssNetConfig cfg_;
    std::vector<SfemStage<T>> stages_;
    std::unique_ptr<Backbone2d<T>> backbone_;
};

// Spec-shaped entry point: [1,F,H,W] in, probability map out.
template <typename T>
ProbabilityMap vssnet_forward(const VssNet<T>& net, const TensorT<T>& seq_1fhw) {
    if (seq_1fhw.rank() != 4 || seq_1fhw.shape[0] != 1)
        throw ShapeMismatch("vssnet_forward: expected [1,F,H,W], got " + shape_str(seq_1fhw.shape));
    TensorT<T> seq({seq_1fhw.shape[1], seq_1fhw.shape[2], seq_1fhw.shape[3]});
    seq.data = seq_1fhw.data;
    nn::NoGradGuard guard;
    auto fwd = net.forward(seq);
    const std::size_t h = seq.shape[1], w = seq.shape[2];
    ProbabilityMap out{Tensor({h, w})};
    const T* vessel = fwd.probs->value.ptr() + h * w;
    for (std::size_t i = 0; i < h * w; ++i) out.probs[i] = static_cast<float>(vessel[i]);
    return out;
}

}  // namespace vsseg::model
