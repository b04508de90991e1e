#include <gtest/gtest.h>

#include "test_support.hpp"
#include "vsseg/selftrain.hpp"
#include "vsseg/tools/synth.hpp"
#include "vsseg/wss.hpp"

using namespace vsseg;

namespace {

// Fixed-probability model for tiled-inference tests.
struct StubModel {
    float p;
    struct Out {
        nn::Var<float> probs;
    };
    Out forward(const Tensor& patch) const {
        const std::size_t h = patch.shape[1], w = patch.shape[2];
        Tensor out({2, h, w});
        for (std::size_t i = 0; i < h * w; ++i) {
            out[i] = 1.0f - p;
            out[h * w + i] = p;
        }
        return {nn::constant(std::move(out))};
    }
};

train::Dataset tiny_synth_set(int n, std::uint64_t seed, std::size_t size = 16,
                              std::size_t frames = 2) {
    train::Dataset out;
    Rng rng(seed);
    for (int i = 0; i < n; ++i) {
        tools::SynthSpec spec;
        spec.size = size;
        spec.frames = frames;
        spec.tree_depth = 3;
        spec.noise = 4.0;
        spec.max_vessel_fraction = 0.3;
        auto [seq, mask] = tools::synthesize_sequence(spec, rng);
        train::LoadedItem item;
        item.id = "t" + std::to_string(i);
        item.seq = data::zscore_normalize(seq);
        item.label = mask.pixels;
        out.items.push_back(std::move(item));
    }
    return out;
}

model::VssNetConfig tiny_model_cfg(std::size_t seq_len) {
    model::VssNetConfig cfg;
    cfg.stages = 2;
    cfg.sfem_channels = {2, 2};
    cfg.backbone_channels = {2, 4};
    cfg.seq_len = seq_len;
    return cfg;
}

train::TrainConfig tiny_train_cfg() {
    train::TrainConfig cfg;
    cfg.epochs = 2;
    cfg.steps_per_epoch = 2;
    cfg.batch_size = 2;
    cfg.patch = 16;
    cfg.tile = 16;
    cfg.lr = 1e-3;
    cfg.seed = 9;
    return cfg;
}

TEST(TilePositions, CoverAndSnap) {
    EXPECT_EQ(infer::tile_positions(64, 64, 32), (std::vector<std::size_t>{0}));
    EXPECT_EQ(infer::tile_positions(64, 32, 16), (std::vector<std::size_t>{0, 16, 32}));
    EXPECT_EQ(infer::tile_positions(100, 64, 32), (std::vector<std::size_t>{0, 32, 36}));
    EXPECT_EQ(infer::tile_positions(16, 64, 32), (std::vector<std::size_t>{0}));
}

TEST(TiledInference, ConstantModelGivesConstantMap) {
    DsaSequence seq;
    seq.frames = Tensor({2, 48, 80}, 0.0f);
    StubModel model{0.7f};
    auto probs = infer::tiled_inference(model, seq, 32);
    EXPECT_EQ(probs.probs.shape, (std::vector<std::size_t>{48, 80}));
    for (float v : probs.probs.data) EXPECT_NEAR(v, 0.7f, 1e-6f);
}

TEST(TiledInference, TileLargerThanImageThrows) {
    DsaSequence seq;
    seq.frames = Tensor({2, 16, 16}, 0.0f);
    StubModel model{0.5f};
    EXPECT_THROW(infer::tiled_inference(model, seq, 32), ShapeMismatch);
}

TEST(TrainFss, LossDecreasesAndBestRestored) {
    auto set = tiny_synth_set(2, 5);
    Rng mrng(3);
    model::VssNet<float> net(tiny_model_cfg(2), mrng);
    auto cfg = tiny_train_cfg();
    cfg.epochs = 6;
    auto result = train::train_fss(net, set, set, cfg);
    ASSERT_EQ(result.history.size(), 6u);
    EXPECT_LT(result.history.back().loss, result.history.front().loss);
    EXPECT_GE(result.best_val_dsc, 0.0);
    // restored weights reproduce the best validation DSC
    const double check = infer::mean_dsc(net, set.items, cfg.tile, cfg.threshold);
    EXPECT_NEAR(check, result.best_val_dsc, 1e-9);
}

TEST(TrainFss, DeterministicGivenSeed) {
    auto set = tiny_synth_set(2, 6);
    auto cfg = tiny_train_cfg();
    Rng r1(4), r2(4);
    model::VssNet<float> net1(tiny_model_cfg(2), r1);
    model::VssNet<float> net2(tiny_model_cfg(2), r2);
    train::train_fss(net1, set, set, cfg);
    train::train_fss(net2, set, set, cfg);
    auto p1 = net1.named_params();
    auto p2 = net2.named_params();
    for (std::size_t i = 0; i < p1.size(); ++i)
        EXPECT_EQ(p1[i].second->value.data, p2[i].second->value.data) << p1[i].first;
}

TEST(TrainFss, EmptyTrainSetThrows) {
    Rng mrng(3);
    model::VssNet<float> net(tiny_model_cfg(2), mrng);
    train::Dataset empty;
    EXPECT_THROW(train::train_fss(net, empty, empty, tiny_train_cfg()), EmptyDataset);
}

TEST(Sscr, IdenticalNetsAndDrawsGiveZeroConsistency) {
    auto set = tiny_synth_set(1, 7);
    // scribble labels: sparse subset of the dense mask
    ScribbleMask scr{TensorT<std::uint8_t>({16, 16}, kUnannotated)};
    for (std::size_t i = 0; i < 256; i += 7) scr.pixels[i] = set.items[0].label[i];
    set.items[0].label = scr.pixels;

    auto mcfg = tiny_model_cfg(2);
    Rng r1(11);
    model::VssNet<float> net_a(mcfg, r1);
    Rng r2(11);
    model::VssNet<float> net_b(mcfg, r2);  // identical parameters

    nn::AdamW<float> opt_a(net_a.params()), opt_b(net_b.params());
    auto cfg = tiny_train_cfg();
    Rng srng(1);
    auto patch = augment::sample_patch(set.items[0].seq, set.items[0].label, 16, srng);

    wss::SscrConfig scfg;
    scfg.strong_for_b = false;  // identical augmentation draws
    Rng step_rng(2);
    auto bundle = wss::sscr_step(net_a, net_b, opt_a, opt_b, {patch}, scfg, cfg.strong, step_rng);
    EXPECT_EQ(bundle.l_con, 0.0);
}

TEST(Sscr, ZeroLambdasReduceToScribbleLoss) {
    auto set = tiny_synth_set(1, 8);
    ScribbleMask scr{TensorT<std::uint8_t>({16, 16}, kUnannotated)};
    for (std::size_t i = 0; i < 256; i += 5) scr.pixels[i] = set.items[0].label[i];
    set.items[0].label = scr.pixels;

    auto mcfg = tiny_model_cfg(2);
    Rng r1(21), r2(22);
    model::VssNet<float> net_a(mcfg, r1), net_b(mcfg, r2);
    nn::AdamW<float> opt_a(net_a.params()), opt_b(net_b.params());
    auto cfg = tiny_train_cfg();
    Rng srng(1);
    auto patch = augment::sample_patch(set.items[0].seq, set.items[0].label, 16, srng);

    wss::SscrConfig scfg;
    scfg.lambda1 = 0.0;
    scfg.lambda2 = 0.0;
    Rng step_rng(2);
    auto bundle = wss::sscr_step(net_a, net_b, opt_a, opt_b, {patch}, scfg, cfg.strong, step_rng);
    EXPECT_EQ(bundle.l_total, bundle.l_scr);
}

TEST(Sscr, CompositionIdentityHoldsInTraining) {
    auto set = tiny_synth_set(2, 9);
    for (auto& item : set.items) {
        TensorT<std::uint8_t> scr({16, 16}, kUnannotated);
        for (std::size_t i = 0; i < 256; i += 6) scr[i] = item.label[i];
        item.label = scr;
    }
    auto mcfg = tiny_model_cfg(2);
    Rng r1(31), r2(32);
    model::VssNet<float> net_a(mcfg, r1), net_b(mcfg, r2);
    nn::AdamW<float> opt_a(net_a.params()), opt_b(net_b.params());
    auto cfg = tiny_train_cfg();
    Rng rng(3);
    for (int step = 0; step < 4; ++step) {
        std::vector<augment::PatchSample> batch;
        for (int b = 0; b < 2; ++b) {
            const auto& item = set.items[static_cast<std::size_t>(rng.uniform_int(0, 1))];
            batch.push_back(augment::sample_patch(item.seq, item.label, 16, rng));
        }
        wss::SscrConfig scfg;
        auto bundle = wss::sscr_step(net_a, net_b, opt_a, opt_b, batch, scfg, cfg.strong, rng);
        EXPECT_EQ(bundle.l_total,
                  bundle.l_scr + bundle.lambda1 * bundle.l_cps + bundle.lambda2 * bundle.l_con);
    }
}

TEST(Sscr, NoGradientFlowsThroughPseudoLabels) {
    // With one-hot consistency (default), the full objective's gradient
    // equals the gradient of scr + lambda1*cps alone.
    Rng rng(41);
    auto logits = nn::leaf(vsseg::test::random_dtensor({2, 4, 4}, rng), true);
    TensorT<std::uint8_t> scribble({4, 4}, kUnannotated);
    scribble.at(0, 0) = 1;
    scribble.at(2, 3) = 0;

    auto run = [&](bool include_con) {
        logits->zero_grad();
        auto probs = nn::softmax_channels(logits);
        auto pl = supervision::pseudo_label_plane(probs->value, scribble);
        TensorT<std::uint8_t> pl_other = pl;
        pl_other.at(1, 1) ^= 1;  // a disagreeing second network
        auto scr = nn::pce_vs_scribble(probs, scribble, true);
        auto cps = nn::ce_vs_mask(probs, pl_other);
        auto total = nn::axpy(scr, 1.0, cps);
        if (include_con) {
            auto con = nn::constant(
                DTensor({1}, supervision::onehot_mse(pl, pl_other)));
            total = nn::axpy(total, 0.5, con);
        }
        nn::backward(total);
        return logits->grad.data;
    };
    const auto grad_with = run(true);
    const auto grad_without = run(false);
    EXPECT_EQ(grad_with, grad_without);
}

TEST(Rpst, PoolBinarizationAndCardinality) {
    auto unlabeled = tiny_synth_set(3, 10);
    for (auto& item : unlabeled.items) item.label = TensorT<std::uint8_t>();
    StubModel model{0.9f};
    auto pool = selftrain::pseudo_label_pool(model, unlabeled, 0.5, 16, 1);
    EXPECT_EQ(pool.entries.size(), 3u);
    for (const auto& e : pool.entries) {
        EXPECT_EQ(e.teacher_generation, 1);
        for (auto v : e.pseudo.pixels.data) EXPECT_EQ(v, 1);
    }
    // threshold 1.0 keeps only p >= 1
    auto strict = selftrain::pseudo_label_pool(model, unlabeled, 1.0, 16, 1);
    for (const auto& e : strict.entries)
        for (auto v : e.pseudo.pixels.data) EXPECT_EQ(v, 0);
}

TEST(Rpst, BatchRespectsSlotRule) {
    auto labeled = tiny_synth_set(2, 11);
    auto pseudo = tiny_synth_set(2, 12);
    selftrain::RpstConfig cfg;
    cfg.trainer = tiny_train_cfg();

    // P -> 0+ means almost every slot draws labeled
    cfg.p = 1e-12;
    Rng rng(1);
    auto batch = selftrain::rpst_batch(labeled, pseudo, cfg, 32, rng);
    for (const auto& p : batch) EXPECT_EQ(p.source, augment::PatchSample::Source::labeled);

    // P -> 1 means pseudo-labeled
    cfg.p = 1.0 - 1e-12;
    auto batch2 = selftrain::rpst_batch(labeled, pseudo, cfg, 32, rng);
    for (const auto& p : batch2) EXPECT_EQ(p.source, augment::PatchSample::Source::pseudo_labeled);
}

TEST(Rpst, MixingFractionNearP) {
    auto labeled = tiny_synth_set(1, 13);
    auto pseudo = tiny_synth_set(1, 14);
    selftrain::RpstConfig cfg;
    cfg.trainer = tiny_train_cfg();
    cfg.trainer.strong.enable_elastic = false;  // keep it fast
    cfg.p = 0.5;
    Rng rng(2);
    int labeled_count = 0;
    const int total = 10000;
    auto batch = selftrain::rpst_batch(labeled, pseudo, cfg, total, rng);
    for (const auto& p : batch) labeled_count += p.source == augment::PatchSample::Source::labeled;
    const double fraction = static_cast<double>(labeled_count) / total;
    EXPECT_NEAR(fraction, 0.5, 0.03);
}

TEST(Rpst, EmptyPoolThrows) {
    auto labeled = tiny_synth_set(1, 15);
    train::Dataset empty;
    selftrain::RpstConfig cfg;
    cfg.trainer = tiny_train_cfg();
    Rng rng(3);
    EXPECT_THROW(selftrain::rpst_batch(labeled, empty, cfg, 4, rng), EmptyPool);
    EXPECT_THROW(selftrain::rpst_batch(empty, labeled, cfg, 4, rng), EmptyPool);
}

TEST(Rpst, GenerationCounterAfterThreeIterations) {
    auto labeled = tiny_synth_set(1, 16);
    auto val = tiny_synth_set(1, 17);
    auto unlabeled = tiny_synth_set(2, 18);
    for (auto& item : unlabeled.items) item.label = TensorT<std::uint8_t>();

    selftrain::RpstConfig cfg;
    cfg.iterations = 3;
    cfg.trainer = tiny_train_cfg();
    cfg.trainer.epochs = 1;
    cfg.trainer.steps_per_epoch = 1;
    auto mcfg = tiny_model_cfg(2);
    auto outcome = selftrain::rpst_train(labeled, unlabeled, val, cfg, [&](std::uint64_t s) {
        Rng r(s);
        return model::VssNet<float>(mcfg, r);
    });
    EXPECT_EQ(outcome.pool_generation, 3);
    EXPECT_EQ(outcome.student_results.size(), 3u);
}

TEST(Rpst, TeacherRequiresLabeledData) {
    Rng mrng(1);
    model::VssNet<float> net(tiny_model_cfg(2), mrng);
    train::Dataset empty, val;
    EXPECT_THROW(selftrain::train_teacher(net, empty, val, tiny_train_cfg()), EmptyDataset);
}

TEST(EvaluateWss, UntrainedNetNearChanceAuc) {
    auto val = tiny_synth_set(3, 19, 32, 2);
    auto mcfg = tiny_model_cfg(2);
    Rng mrng(5);
    model::VssNet<float> net(mcfg, mrng);
    double auc_sum = 0;
    for (const auto& item : val.items) {
        auto probs = infer::tiled_inference(net, item.seq, 32);
        auc_sum += eval::auc(probs, VesselMask{item.label});
    }
    EXPECT_NEAR(auc_sum / 3.0, 0.5, 0.25);
}

}  // namespace
