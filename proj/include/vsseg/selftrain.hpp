#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "vsseg/train.hpp"

// RPST: random patch-based self-training. A teacher trained on the labeled
// pool hard-labels the unlabeled sequences; each iteration a fresh student
// trains on batches mixed patch-by-patch from labeled (weak+strong) and
// pseudo-labeled (weak only) data, and — except after the last iteration —
// relabels the pool.

namespace vsseg::selftrain {

struct PoolEntry {
    std::string sequence_id;
    VesselMask pseudo;
    int teacher_generation = 0;
};

struct PseudoLabeledPool {
    std::vector<PoolEntry> entries;
    int generation = 0;
};

struct RpstConfig {
    double p = 0.5;  // slot draw r > p selects a labeled patch
    int iterations = 1;
    double threshold = 0.5;
    bool strong_on_labeled = true;  // the "S w/o SDA" ablation flips this off
    train::TrainConfig trainer;     // shared by teacher and students
    // An epoch is a fixed step count, so students see more data per epoch
    // than the teacher; 0 keeps the teacher's steps_per_epoch.
    int student_steps_per_epoch = 0;
};

inline train::TrainResult train_teacher(model::VssNet<float>& net,
                                        const train::Dataset& labeled,
                                        const train::Dataset& val_set,
                                        const train::TrainConfig& cfg) {
    if (labeled.empty()) throw EmptyDataset("train_teacher: no labeled sequences");
    train::TrainConfig teacher_cfg = cfg;
    teacher_cfg.use_strong = false;
    return train::train_fss(net, labeled, val_set, teacher_cfg);
}

// Full-resolution tiled inference per unlabeled sequence, binarized at the
// threshold into hard labels.
template <typename Model>
PseudoLabeledPool pseudo_label_pool(const Model& net, const train::Dataset& unlabeled,
                                    double threshold, std::size_t tile, int generation) {
    PseudoLabeledPool pool;
    pool.generation = generation;
    pool.entries.reserve(unlabeled.size());
    for (const auto& item : unlabeled.items) {
        auto probs = infer::tiled_inference(net, item.seq, tile);
        pool.entries.push_back({item.id, eval::binarize(probs, threshold), generation});
    }
    return pool;
}

// Unlabeled sequences paired with their current pseudo-labels, as a dataset
// the patch sampler understands.
inline train::Dataset attach_pool(const train::Dataset& unlabeled, const PseudoLabeledPool& pool) {
    if (unlabeled.size() != pool.entries.size())
        throw ShapeMismatch("attach_pool: pool/unlabeled size mismatch");
    train::Dataset out;
    out.items.reserve(unlabeled.size());
    for (std::size_t i = 0; i < unlabeled.size(); ++i) {
        train::LoadedItem item;
        item.id = unlabeled.items[i].id;
        item.seq = unlabeled.items[i].seq;
        item.label = pool.entries[i].pseudo.pixels;
        out.items.push_back(std::move(item));
    }
    return out;
}

// One student mini-batch: per slot, r > P draws a labeled patch with
// weak+strong augmentation, otherwise a pseudo-labeled patch with weak only.
inline std::vector<augment::PatchSample> rpst_batch(const train::Dataset& labeled,
                                                    const train::Dataset& pseudo_labeled,
                                                    const RpstConfig& cfg, int batch_size,
                                                    Rng& rng) {
    if (labeled.empty() || pseudo_labeled.empty())
        throw EmptyPool("rpst_batch: both pools must be nonempty");
    std::vector<augment::PatchSample> batch;
    batch.reserve(batch_size);
    const auto& tcfg = cfg.trainer;
    for (int b = 0; b < batch_size; ++b) {
        const double r = rng.uniform();
        if (r > cfg.p) {
            const auto& item = labeled.items[static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<std::int64_t>(labeled.size()) - 1))];
            auto p = augment::sample_patch(item.seq, item.label, tcfg.patch, rng,
                                           augment::PatchSample::Source::labeled);
            p = augment::weak_augment(std::move(p), tcfg.weak, rng);
            if (cfg.strong_on_labeled) p = augment::strong_augment(std::move(p), tcfg.strong, rng);
            batch.push_back(std::move(p));
        } else {
            const auto& item = pseudo_labeled.items[static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<std::int64_t>(pseudo_labeled.size()) - 1))];
            auto p = augment::sample_patch(item.seq, item.label, tcfg.patch, rng,
                                           augment::PatchSample::Source::pseudo_labeled);
            batch.push_back(augment::weak_augment(std::move(p), tcfg.weak, rng));
        }
    }
    return batch;
}

inline train::TrainResult train_student(model::VssNet<float>& net, const train::Dataset& labeled,
                                        const train::Dataset& pseudo_labeled,
                                        const train::Dataset& val_set, const RpstConfig& cfg,
                                        std::uint64_t seed) {
    const auto& tcfg = cfg.trainer;
    nn::AdamW<float>::Options opts;
    opts.lr = tcfg.lr;
    opts.weight_decay = tcfg.weight_decay;
    nn::AdamW<float> opt(net.params(), opts);
    Rng rng(seed);

    train::TrainResult result;
    const auto params = net.named_params();
    for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
        opt.set_lr(nn::cosine_lr(tcfg.lr, epoch, tcfg.epochs));
        double loss_sum = 0.0;
        long loss_count = 0;
        for (int step = 0; step < tcfg.steps_per_epoch; ++step) {
            opt.zero_grad();
            auto batch = rpst_batch(labeled, pseudo_labeled, cfg, tcfg.batch_size, rng);
            for (const auto& p : batch) {
                auto fwd = net.forward(p.seq_patch);
                auto loss = nn::dice_ce(fwd.probs, p.label_patch);
                loss_sum += loss->value[0];
                ++loss_count;
                nn::backward(loss, 1.0f / static_cast<float>(batch.size()));
            }
            opt.step();
        }
        const double val_dsc =
            val_set.empty() ? 0.0 : infer::mean_dsc(net, val_set.items, tcfg.tile, tcfg.threshold);
        result.history.push_back(
            {epoch, loss_sum / static_cast<double>(loss_count), val_dsc, opt.lr()});
        if (val_dsc > result.best_val_dsc) {
            result.best_val_dsc = val_dsc;
            result.best_epoch = epoch;
            result.best_params = model::snapshot_params(params);
        }
        if (val_dsc >= tcfg.stop_at_dsc) break;
    }
    if (!result.best_params.empty()) model::restore_params(result.best_params, params);
    return result;
}

struct RpstOutcome {
    train::TrainResult teacher_result;
    std::vector<train::TrainResult> student_results;
    model::VssNet<float> student;  // final student, best-val weights
    int pool_generation = 0;
};

// Full pipeline of teacher training, pool labeling and N student iterations.
// `make_net` builds a freshly initialized network from a seed; students are
// re-initialized every iteration.
inline RpstOutcome rpst_train(const train::Dataset& labeled, const train::Dataset& unlabeled,
                              const train::Dataset& val_set, const RpstConfig& cfg,
                              const std::function<model::VssNet<float>(std::uint64_t)>& make_net) {
    if (cfg.iterations < 1) throw Error("rpst_train: iterations must be >= 1");
    if (unlabeled.empty()) throw EmptyPool("rpst_train: no unlabeled sequences");

    const std::uint64_t base_seed = cfg.trainer.seed;
    auto teacher = make_net(base_seed);
    auto teacher_result = train_teacher(teacher, labeled, val_set, cfg.trainer);
    auto pool = pseudo_label_pool(teacher, unlabeled, cfg.threshold, cfg.trainer.tile, 1);

    std::vector<train::TrainResult> student_results;
    std::optional<model::VssNet<float>> last_student;
    RpstConfig student_cfg = cfg;
    if (cfg.student_steps_per_epoch > 0)
        student_cfg.trainer.steps_per_epoch = cfg.student_steps_per_epoch;
    for (int it = 1; it <= cfg.iterations; ++it) {
        auto student = make_net(base_seed + static_cast<std::uint64_t>(it));
        auto pseudo_set = attach_pool(unlabeled, pool);
        student_results.push_back(train_student(student, labeled, pseudo_set, val_set, student_cfg,
                                                base_seed + 1000 + static_cast<std::uint64_t>(it)));
        if (it != cfg.iterations) {
            pool = pseudo_label_pool(student, unlabeled, cfg.threshold, cfg.trainer.tile, it + 1);
        }
        last_student.emplace(std::move(student));
    }
    return RpstOutcome{std::move(teacher_result), std::move(student_results),
                       std::move(*last_student), pool.generation};
}

}  // namespace vsseg::selftrain
