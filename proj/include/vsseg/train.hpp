#pragma once

#include <map>
#include <string>
#include <vector>

#include "vsseg/augment.hpp"
#include "vsseg/data.hpp"
#include "vsseg/infer.hpp"
#include "vsseg/model/checkpoint.hpp"
#include "vsseg/model/vssnet.hpp"
#include "vsseg/nn/adamw.hpp"
#include "vsseg/nn/losses.hpp"

// Shared training machinery: in-memory datasets, the fully-supervised
// training loop (Dice+CE), epoch-end validation and best-DSC selection.

namespace vsseg::train {

struct LoadedItem {
    std::string id;
    DsaSequence seq;                 // resampled to seq_len, z-score normalized
    TensorT<std::uint8_t> label;     // dense {0,1}, scribble {0,1,255}, or empty
};

struct Dataset {
    std::vector<LoadedItem> items;
    bool empty() const { return items.empty(); }
    std::size_t size() const { return items.size(); }
};

enum class LabelKind { dense, scribble, none };

inline Dataset load_split(const data::DatasetIndex& index, data::Split split,
                          std::size_t seq_len, LabelKind kind = LabelKind::dense) {
    Dataset out;
    for (const auto& entry : index.of_split(split)) {
        LoadedItem item;
        item.id = entry.patient_id + "/" + entry.sequence_id;
        item.seq = data::zscore_normalize(
            data::resample_length(data::load_sequence(entry.sequence_path), seq_len));
        item.seq.id = item.id;
        if (kind == LabelKind::dense) {
            if (!entry.label_path)
                throw EmptyDataset("entry " + item.id + " has no dense label");
            item.label = data::load_vessel_mask(*entry.label_path).pixels;
        } else if (kind == LabelKind::scribble) {
            if (!entry.scribble_path)
                throw EmptyDataset("entry " + item.id + " has no scribble");
            item.label = data::load_scribble_mask(*entry.scribble_path).pixels;
        }
        out.items.push_back(std::move(item));
    }
    return out;
}

struct TrainConfig {
    int epochs = 100;
    int steps_per_epoch = 50;
    int batch_size = 64;
    std::size_t patch = 64;
    double lr = 5e-4;
    double weight_decay = 1e-4;
    double threshold = 0.5;
    std::uint64_t seed = 42;
    augment::WeakConfig weak;
    augment::StrongConfig strong;
    bool use_strong = false;  // weak-only by default for FSS
    std::size_t tile = 64;
    double stop_at_dsc = 2.0;  // early stop once validation DSC reaches this
};

struct EpochLog {
    int epoch = 0;
    double loss = 0.0;
    double val_dsc = 0.0;
    double lr = 0.0;
};

struct TrainResult {
    std::map<std::string, Tensor> best_params;
    double best_val_dsc = -1.0;
    int best_epoch = -1;
    std::vector<EpochLog> history;
};

// Random (sequence, corner) patch with weak (and optionally strong)
// augmentation.
inline augment::PatchSample draw_patch(const Dataset& set, const TrainConfig& cfg, Rng& rng,
                                       augment::PatchSample::Source source =
                                           augment::PatchSample::Source::labeled) {
    const auto& item = set.items[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(set.size()) - 1))];
    auto p = augment::sample_patch(item.seq, item.label, cfg.patch, rng, source);
    p = augment::weak_augment(std::move(p), cfg.weak, rng);
    if (cfg.use_strong) p = augment::strong_augment(std::move(p), cfg.strong, rng);
    return p;
}

// Fully-supervised training on dense labels; the best-validation-DSC weights
// are restored into the network before returning.
inline TrainResult train_fss(model::VssNet<float>& net, const Dataset& train_set,
                             const Dataset& val_set, const TrainConfig& cfg) {
    if (train_set.empty()) throw EmptyDataset("train_fss: empty training set");
    const Dataset& selection_set = val_set.empty() ? train_set : val_set;

    nn::AdamW<float>::Options opts;
    opts.lr = cfg.lr;
    opts.weight_decay = cfg.weight_decay;
    nn::AdamW<float> opt(net.params(), opts);
    Rng rng(cfg.seed);

    TrainResult result;
    const auto params = net.named_params();
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        opt.set_lr(nn::cosine_lr(cfg.lr, epoch, cfg.epochs));
        double loss_sum = 0.0;
        long loss_count = 0;
        for (int step = 0; step < cfg.steps_per_epoch; ++step) {
            opt.zero_grad();
            for (int b = 0; b < cfg.batch_size; ++b) {
                auto p = draw_patch(train_set, cfg, rng);
                auto fwd = net.forward(p.seq_patch);
                auto loss = nn::dice_ce(fwd.probs, p.label_patch);
                loss_sum += loss->value[0];
                ++loss_count;
                nn::backward(loss, 1.0f / static_cast<float>(cfg.batch_size));
            }
            opt.step();
        }
        const double val_dsc = infer::mean_dsc(net, selection_set.items, cfg.tile, cfg.threshold);
        result.history.push_back(
            {epoch, loss_sum / static_cast<double>(loss_count), val_dsc, opt.lr()});
        if (val_dsc > result.best_val_dsc) {
            result.best_val_dsc = val_dsc;
            result.best_epoch = epoch;
            result.best_params = model::snapshot_params(params);
        }
        if (val_dsc >= cfg.stop_at_dsc) break;
    }
    if (!result.best_params.empty()) model::restore_params(result.best_params, params);
    return result;
}

}  // namespace vsseg::train
