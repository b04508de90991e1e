#pragma once

#include <vector>

#include "vsseg/supervision.hpp"
#include "vsseg/train.hpp"

// SSCR: dual-network scribble-supervised training. Both networks see the
// same weak augmentation draw (keeping pixel correspondence for the cross
// terms); network B optionally receives strong (photometric) augmentation on
// top. Losses: scribble pCE, cross pseudo supervision, and a consistency
// penalty between the two pseudo-label maps.

namespace vsseg::wss {

struct SscrConfig {
    double lambda1 = 1.0;
    double lambda2 = 0.5;
    bool normalize_pce = true;
    // Default consistency compares one-hot pseudo-labels (constants, no
    // gradient); the probability-MSE alternative sits behind this flag.
    bool consistency_on_probs = false;
    bool strong_for_b = true;
};

// One optimizer step on both networks over a batch of scribble patches.
// Pseudo-labels are detached constants: gradients never flow through label
// creation.
inline supervision::LossBundle sscr_step(model::VssNet<float>& net_a, model::VssNet<float>& net_b,
                                         nn::AdamW<float>& opt_a, nn::AdamW<float>& opt_b,
                                         const std::vector<augment::PatchSample>& batch,
                                         const SscrConfig& cfg,
                                         const augment::StrongConfig& strong_cfg, Rng& rng) {
    if (batch.empty()) throw EmptyDataset("sscr_step: empty batch");
    opt_a.zero_grad();
    opt_b.zero_grad();

    double scr_sum = 0, cps_sum = 0, con_sum = 0;
    const auto b_count = static_cast<float>(batch.size());
    for (const auto& patch : batch) {
        augment::PatchSample input_b =
            cfg.strong_for_b ? augment::strong_augment(patch, strong_cfg, rng) : patch;

        auto fwd_a = net_a.forward(patch.seq_patch);
        auto fwd_b = net_b.forward(input_b.seq_patch);

        auto pce_a = nn::pce_vs_scribble(fwd_a.probs, patch.label_patch, cfg.normalize_pce);
        auto pce_b = nn::pce_vs_scribble(fwd_b.probs, input_b.label_patch, cfg.normalize_pce);
        auto l_scr = nn::axpy(nn::scale(pce_a, 0.5f), 0.5f, pce_b);

        const auto pl_a = supervision::pseudo_label_plane(fwd_a.probs->value, patch.label_patch);
        const auto pl_b = supervision::pseudo_label_plane(fwd_b.probs->value, input_b.label_patch);
        auto ce_ab = nn::ce_vs_mask(fwd_a.probs, pl_b);
        auto ce_ba = nn::ce_vs_mask(fwd_b.probs, pl_a);
        auto l_cps = nn::axpy(nn::scale(ce_ab, 0.5f), 0.5f, ce_ba);

        nn::Var<float> l_con;
        if (cfg.consistency_on_probs) {
            l_con = nn::mse(fwd_a.probs, fwd_b.probs);
        } else {
            l_con = nn::constant(
                Tensor({1}, static_cast<float>(supervision::onehot_mse(pl_a, pl_b))));
        }

        auto total = nn::axpy(nn::axpy(l_scr, static_cast<float>(cfg.lambda1), l_cps),
                              static_cast<float>(cfg.lambda2), l_con);
        scr_sum += l_scr->value[0];
        cps_sum += l_cps->value[0];
        con_sum += l_con->value[0];
        nn::backward(total, 1.0f / b_count);
    }
    opt_a.step();
    opt_b.step();
    return supervision::LossBundle::compose(scr_sum / batch.size(), cps_sum / batch.size(),
                                            con_sum / batch.size(), cfg.lambda1, cfg.lambda2);
}

// Metrics come from network A alone.
inline MetricsReport evaluate_wss(const model::VssNet<float>& net_a, const train::Dataset& dataset,
                                  std::size_t tile, double threshold = 0.5) {
    return infer::evaluate_model(net_a, dataset.items, tile, threshold);
}

struct WssTrainResult {
    train::TrainResult net_a;  // selection history (net A is the reported net)
    std::vector<supervision::LossBundle> last_bundles;
};

// Scribble-supervised training loop. train_set labels are scribbles
// ({0,1,255}); validation labels are dense masks.
inline WssTrainResult train_wss(model::VssNet<float>& net_a, model::VssNet<float>& net_b,
                                const train::Dataset& train_set, const train::Dataset& val_set,
                                const train::TrainConfig& cfg, const SscrConfig& scfg) {
    if (train_set.empty()) throw EmptyDataset("train_wss: empty training set");
    nn::AdamW<float>::Options opts;
    opts.lr = cfg.lr;
    opts.weight_decay = cfg.weight_decay;
    nn::AdamW<float> opt_a(net_a.params(), opts);
    nn::AdamW<float> opt_b(net_b.params(), opts);
    Rng rng(cfg.seed);

    WssTrainResult result;
    const auto params_a = net_a.named_params();
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = nn::cosine_lr(cfg.lr, epoch, cfg.epochs);
        opt_a.set_lr(lr);
        opt_b.set_lr(lr);
        double loss_sum = 0.0;
        for (int step = 0; step < cfg.steps_per_epoch; ++step) {
            std::vector<augment::PatchSample> batch;
            batch.reserve(cfg.batch_size);
            for (int b = 0; b < cfg.batch_size; ++b) {
                // shared weak draw; strong for B happens inside sscr_step
                const auto& item = train_set.items[static_cast<std::size_t>(
                    rng.uniform_int(0, static_cast<std::int64_t>(train_set.size()) - 1))];
                auto p = augment::sample_patch(item.seq, item.label, cfg.patch, rng);
                batch.push_back(augment::weak_augment(std::move(p), cfg.weak, rng));
            }
            auto bundle = sscr_step(net_a, net_b, opt_a, opt_b, batch, scfg, cfg.strong, rng);
            loss_sum += bundle.l_total;
            if (epoch + 1 == cfg.epochs && step + 1 == cfg.steps_per_epoch)
                result.last_bundles.push_back(bundle);
        }
        const double val_dsc =
            val_set.empty() ? 0.0 : infer::mean_dsc(net_a, val_set.items, cfg.tile, cfg.threshold);
        result.net_a.history.push_back(
            {epoch, loss_sum / cfg.steps_per_epoch, val_dsc, lr});
        if (val_dsc > result.net_a.best_val_dsc) {
            result.net_a.best_val_dsc = val_dsc;
            result.net_a.best_epoch = epoch;
            result.net_a.best_params = model::snapshot_params(params_a);
        }
        if (val_dsc >= cfg.stop_at_dsc) break;
    }
    if (!result.net_a.best_params.empty())
        model::restore_params(result.net_a.best_params, params_a);
    return result;
}

// Single-network scribble baseline: partial cross-entropy only.
inline train::TrainResult train_pce_baseline(model::VssNet<float>& net,
                                             const train::Dataset& train_set,
                                             const train::Dataset& val_set,
                                             const train::TrainConfig& cfg,
                                             bool normalize_pce = true) {
    if (train_set.empty()) throw EmptyDataset("train_pce_baseline: empty training set");
    nn::AdamW<float>::Options opts;
    opts.lr = cfg.lr;
    opts.weight_decay = cfg.weight_decay;
    nn::AdamW<float> opt(net.params(), opts);
    Rng rng(cfg.seed);

    train::TrainResult result;
    const auto params = net.named_params();
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        opt.set_lr(nn::cosine_lr(cfg.lr, epoch, cfg.epochs));
        double loss_sum = 0.0;
        long loss_count = 0;
        for (int step = 0; step < cfg.steps_per_epoch; ++step) {
            opt.zero_grad();
            for (int b = 0; b < cfg.batch_size; ++b) {
                auto p = train::draw_patch(train_set, cfg, rng);
                auto fwd = net.forward(p.seq_patch);
                auto loss = nn::pce_vs_scribble(fwd.probs, p.label_patch, normalize_pce);
                loss_sum += loss->value[0];
                ++loss_count;
                nn::backward(loss, 1.0f / static_cast<float>(cfg.batch_size));
            }
            opt.step();
        }
        const double val_dsc =
            val_set.empty() ? 0.0 : infer::mean_dsc(net, val_set.items, cfg.tile, cfg.threshold);
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

}  // namespace vsseg::wss
